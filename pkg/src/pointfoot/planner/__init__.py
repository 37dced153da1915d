"""Footstep planning over the prismatic inverted pendulum."""

from pointfoot.planner.pipm import (
    DT,
    G,
    AxisPlan,
    FootstepPlan,
    FootstepResult,
    HeightSurface,
    PipmObserver,
    PipmState,
    PlanLog,
    PlanParams,
    Trajectory,
    apply_impact,
    find_footstep,
    integrate_pipm,
    pipm_accel,
    plan_1d,
    plan_3d,
    switching_state,
)

__all__ = [
    "DT", "G", "AxisPlan", "FootstepPlan", "FootstepResult", "HeightSurface", "PipmObserver", "PipmState",
    "PlanLog", "PlanParams", "Trajectory", "apply_impact", "find_footstep", "integrate_pipm", "pipm_accel",
    "plan_1d", "plan_3d", "switching_state",
]
