"""Deterministic contact simulation, joint torque model, phase machine and scenarios."""

from pointfoot.sim.initial import stance_state, stance_velocity
from pointfoot.sim.sea import IDEAL, SEA_LAG, SeaBank, SeaJoint, sea_joint_torque
from pointfoot.sim.sensing import TorsoSensing
from pointfoot.sim.statemachine import PHASES, PhaseTimes, WalkingStateMachine
from pointfoot.sim.swing import PiecewiseCubic, SwingTrajectory, swing_trajectory
from pointfoot.sim.terrain import Terrain
from pointfoot.sim.world import ActiveContact, ContactEvent, Push, SimWorld, step
from pointfoot.sim.scenarios import RunResult, ScenarioRunner, run_scenario, settling_time, write_outputs

__all__ = [name for name in dir() if not name.startswith("_")]
