"""Closed-loop scenarios: split-terrain balance, stepping in place and undirected walking.

Every scenario runs the same loop: a controller tick at ``control_dt`` reads
the plant state, builds the whole-body command for the current phase, passes
it through the joint torque model and holds it for the plant substeps.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pointfoot.errors import ConfigError, PointfootError, SimulationDivergedError
from pointfoot.model import GeneralizedState, Kinematics, load_model
from pointfoot.planner import HeightSurface, PipmObserver, PipmState, PlanLog, PlanParams, plan_1d, plan_3d
from pointfoot.sim import statemachine as sm
from pointfoot.sim.initial import stance_state, stance_velocity
from pointfoot.sim.sea import IDEAL, SeaBank
from pointfoot.sim.sensing import TorsoSensing
from pointfoot.sim.swing import SwingTrajectory
from pointfoot.sim.terrain import Terrain
from pointfoot.sim.world import Push, SimWorld
from pointfoot.wbosc import (
    LANDING,
    LIFTING,
    InternalForceSpec,
    Task,
    TransitionState,
    build_W_int,
    contact_set_from_kinematics,
    coordinate_lock,
    point_contact,
    swing_reaction,
    transition_command,
    whole_body_command,
)

log = logging.getLogger(__name__)

FEET = ("r_foot", "l_foot")
_AXES = "xyz"
_TASK_KIND = {"COM_x": ("com-planar-position", ("x",)), "COM_y": ("com-planar-position", ("y",)),
              "COM_z": ("com-height", None), "pitch": ("body-pitch", None), "roll": ("body-roll", None)}
INTEGRAL_LIMIT = 0.5
STEADY_STATE_AFTER = 2.0


@dataclass
class RunResult:
    scenario: str
    status: str
    summary: dict
    columns: list
    rows: list
    plan_log: PlanLog | None = None
    series: dict = field(default_factory=dict)

    @property
    def fell(self) -> bool:
        return self.status == "fall"


# --- references ------------------------------------------------------------------------------

def _smoothstep(s):
    """Quintic ramp with zero first and second derivative at both ends: (r, r', r'')."""
    if s <= 0:
        return 0.0, 0.0, 0.0
    if s >= 1:
        return 1.0, 0.0, 0.0
    return 10 * s**3 - 15 * s**4 + 6 * s**5, 30 * s**2 - 60 * s**3 + 30 * s**4, 60 * s - 180 * s**2 + 120 * s**3


def ellipse_reference(t, centre, amplitude, period, ramp):
    """COM (x, z) on an ellipse about ``centre``, faded in over ``ramp`` seconds.

    x = ax sin(wt), z = az (cos(wt) - 1): the curve starts at the centre and
    circles the point az below it.
    """
    w = 2 * np.pi / period
    ax, az = amplitude
    f = np.array([ax * np.sin(w * t), az * np.cos(w * t) - az])
    fd = np.array([ax * w * np.cos(w * t), -az * w * np.sin(w * t)])
    fdd = -w**2 * np.array([ax * np.sin(w * t), az * np.cos(w * t)])
    if ramp > 0:
        r, rd, rdd = _smoothstep(t / ramp)
        rd, rdd = rd / ramp, rdd / ramp**2
    else:
        r, rd, rdd = 1.0, 0.0, 0.0
    c = np.asarray(centre, dtype=float)
    return c + r * f, rd * f + r * fd, rdd * f + 2 * rd * fd + r * fdd


# --- setup helpers ---------------------------------------------------------------------------

def build_terrain(cfg) -> Terrain:
    tc = cfg.get("terrain", {})
    if tc.get("kind", "flat") == "split":
        return Terrain.split(tc.get("angle_deg", 45.0), tc.get("half_width", 0.25))
    return Terrain.flat()


def build_tasks(table: dict, model, foot_axes_out: dict) -> dict:
    """Persistent tasks for every non-foot entry of a gain table."""
    tasks = {}
    for key in table:
        if key.startswith("foot_"):
            foot_axes_out[key[-1]] = table[key]
            continue
        if key not in _TASK_KIND:
            raise ConfigError(f"unknown task {key!r} in gain table", problems=[(f"gains.{key}", "unknown task")])
        kind, axes = _TASK_KIND[key]
        tasks[key] = Task(key, kind, axes=axes, integral_limit=INTEGRAL_LIMIT)
    return tasks


def apply_gains(task: Task, entry):
    task.kp, task.ki, task.kd = float(entry["K"]), float(entry["I"]), float(entry["D"])


def torque_gains(table: dict, names) -> tuple:
    default = table.get("*", {"K_P": 50.0, "K_I": 0.0})
    kp = np.array([table.get(n, default)["K_P"] for n in names], dtype=float)
    ki = np.array([table.get(n, default)["K_I"] for n in names], dtype=float)
    return kp, ki


# --- runner ----------------------------------------------------------------------------------

class ScenarioRunner:
    """Owns the world, controller state and logs of one run."""

    def __init__(self, name: str, cfg: dict):
        if name not in ("split_terrain", "stepping", "undirected_walking"):
            raise ConfigError(f"unknown scenario {name!r}", problems=[("scenario", name)])
        self.name = name
        self.cfg = cfg
        simc = cfg["sim"]
        self.model = load_model(cfg["model"])
        m = self.model
        self.dt = float(simc.get("dt", 1e-4))
        self.control_dt = float(simc.get("control_dt", 1e-3))
        self.n_sub = int(round(self.control_dt / self.dt))
        self.duration = float(simc.get("duration", 10.0))
        self.omit_coriolis = bool(simc.get("omit_coriolis", True))
        self.log_every = int(simc.get("log_every", 10))
        self.rng = np.random.default_rng(cfg.get("seed", 0))
        self.com_noise = float(simc.get("com_noise", 0.0))
        self.terrain = build_terrain(cfg)
        self.rows = list(m.task_rows)
        fall = cfg.get("fall", {})
        self.com_min = float(fall.get("com_height_min", 0.6))
        self.pitch_max = float(fall.get("pitch_max", 0.8))
        self.roll_max = float(fall.get("roll_max", 0.8))

        # initial stance
        st = cfg.get("stance", {})
        fx = st.get("foot_x", [0.0, 0.0])
        fy = st.get("foot_y", [-0.1, 0.1])
        feet = {}
        for k, f in enumerate(FEET):
            p = np.array([fx[k], fy[k], 0.0])
            p[2] = self.terrain.height(p)
            feet[f] = p
        com = np.array([np.mean(fx), np.mean(fy), st.get("com_height", 0.95)])[self.rows]
        state = stance_state(m, feet, com)
        if any(st.get("com_velocity", [0.0])):
            state = stance_velocity(m, state, FEET, st["com_velocity"])
        base = simc.get("baumgarte", {})
        mu = cfg.get("terrain", {}).get("mu", 1.0)
        pushes = [Push(d["t"], d["duration"], np.asarray(d["force"], dtype=float), d.get("point"),
                       d.get("body", "torso")) for d in cfg.get("disturbances", [])]
        self.world = SimWorld(m, state, self.terrain, mu=mu, dt=self.dt, method=simc.get("integrator", "rk4"),
                              pushes=pushes, watch=(), kp=base.get("kp", 400.0), kd=base.get("kd", 40.0))
        for f in FEET:
            self.world.add_contact(f, feet[f])
        self.locks = list(cfg.get("planarizer", []))
        for c in self.locks:
            self.world.add_lock(c)
        self.lock_contacts = [coordinate_lock(m, c) for c in self.locks]
        self.foot_contacts = {f: point_contact(m, f) for f in FEET}

        # controller state
        gains = cfg.get("gains", {})
        if name == "split_terrain":
            self.table_dual = self.table_single = gains.get("position", {})
        else:
            self.table_dual = gains["position_dual"]
            self.table_single = gains["position_single"]
        foot_gains = {}
        self.tasks = build_tasks(self.table_dual, m, {})
        self.tasks.update({k: v for k, v in build_tasks(self.table_single, m, foot_gains).items()
                           if k not in self.tasks})
        for k, task in self.tasks.items():
            apply_gains(task, self.table_dual.get(k, self.table_single.get(k)))
        self.dual_names = [k for k in self.table_dual if not k.startswith("foot_")]
        self.single_names = [k for k in self.table_single if not k.startswith("foot_")]
        self.foot_axes = tuple(a for a in _AXES if a in foot_gains)
        self.foot_gains = foot_gains
        self.foot_tasks = {}
        if self.foot_axes:
            for f in FEET:
                t = Task(f"swing:{f}", "foot-position", point=f, axes=self.foot_axes,
                         integral_limit=INTEGRAL_LIMIT)
                t.kp = np.array([foot_gains[a]["K"] for a in self.foot_axes], dtype=float)
                t.ki = np.array([foot_gains[a]["I"] for a in self.foot_axes], dtype=float)
                t.kd = np.array([foot_gains[a]["D"] for a in self.foot_axes], dtype=float)
                self.foot_tasks[f] = t
        self.foot_rows = [_AXES.index(a) for a in self.foot_axes]

        ic = cfg.get("internal_force", {})
        self.internal = None
        if ic.get("enabled", False):
            self.internal = InternalForceSpec("r_foot", "l_foot", float(ic.get("ref", 0.0)),
                                              float(gains.get("internal_force", {}).get("K_F", 1.0)))

        tq = gains.get("torque", {})
        names = m.actuated_names
        self.sea = SeaBank(m.n_actuated, simc.get("torque_mode", IDEAL), dry_friction=simc.get("dry_friction", 0.0))
        self.sensing = None
        if simc.get("state_source", "ground-truth") == "estimator":
            self.sensing = TorsoSensing(m, self.world.state, self.control_dt, self.rng)
        self.kp_default, self.ki_default = torque_gains(tq.get("default", {}), names)
        swing_table = dict(tq.get("default", {}))
        swing_table.update(tq.get("swing", {}))
        self.kp_swing, self.ki_swing = torque_gains(swing_table, names)
        self.sea.set_gains(self.kp_default, self.ki_default)
        self.names = names

        # references captured from the initial state
        kin = Kinematics(m, self.world.state)
        self.com0 = kin.com((0, 1, 2))[0] if m.mode == "spatial" else np.insert(kin.com()[0], 1, 0.0)
        for key, task in self.tasks.items():
            x, _, _ = task.kinematics(kin)
            ref = np.zeros(1) if key in ("pitch", "roll") else x
            task.set_reference(ref)
        cref = cfg.get("com_reference", {"kind": "hold"})
        self.com_ref_kind = cref.get("kind", "hold")
        self.ellipse = (cref.get("amplitude", [0.03, 0.02]), cref.get("period", 5.0), cref.get("ramp", 1.0))

        # phase machine
        self.phases = None
        if name != "split_terrain":
            ph = cfg.get("phases", {})
            times = sm.PhaseTimes(ph.get("transition", 0.02), ph.get("lifting", 0.23), ph.get("landing", 0.26),
                                  ph.get("dual", 0.079))
            block = cfg.get("stepping" if name == "stepping" else "walking", {})
            transitions = block.get("transitions", True) if name == "stepping" else True
            self.phases = sm.WalkingStateMachine(times, transitions, first_swing=self._first_swing(kin))
            self.steps_target = int(block.get("steps", 20))
            self.apex = float(block.get("apex", 0.05))
            self.touchdown_speed = float(block.get("touchdown_speed", 0.05))
        self.trans: TransitionState | None = None
        self.swing_traj: SwingTrajectory | None = None
        self.planned = False

        # planner
        self.plan_params = None
        self.plan_log = None
        if name == "undirected_walking":
            pc = dict(cfg.get("planner", {}))
            ph = cfg.get("phases", {})
            self.min_width = float(pc.pop("min_width", 0.1))
            gain = float(pc.pop("observer_gain", 0.2))
            kw = {k: pc[k] for k in ("t_prime", "impact_bias", "impact_bias_y", "y_dot_max", "y_dot_min", "reach",
                                     "reach_y", "include_transition", "trigger_fraction", "max_extension", "dual_coast")
                  if k in pc}
            if "t_prime" in ph and "t_prime" not in kw:
                kw["t_prime"] = ph["t_prime"]
            for k in ("lifting", "landing", "transition", "dual"):
                if k in ph:
                    kw[k] = ph[k]
            self.plan_params = PlanParams(**kw).validate()
            self.plan_log = PlanLog()
            self.surface = HeightSurface.flat(float(self.tasks["COM_z"].x_ref[0]))
            self.observers = {a: PipmObserver(self.surface, gain, gain, self.control_dt)
                              for a in (("x", "y") if m.mode == "spatial" else ("x",))}

        # logs and metrics
        self.tau_cmd_prev = None
        self.tau_del = None
        self.columns = self._columns()
        self.log_rows = []
        self.series = {k: [] for k in ("t", "com_x_err", "com_z_err", "com_err", "pitch_err", "roll_err",
                                       "orientation_err", "tau_jump", "F_int_plant", "F_int_ref", "com_speed",
                                       "phase")}
        self.fall_reason = None
        self.events = []
        self.touchdowns = 0
        self.p_last = {}

    # --- helpers -----------------------------------------------------------------------------

    def _first_swing(self, kin) -> str:
        """Swing the foot lying behind the initial COM velocity first."""
        v = self.cfg.get("stance", {}).get("com_velocity", [0.0])
        px = {f: kin.named_point(f, (0,))[0][0] for f in FEET}
        if v and v[0] != 0:
            back = min(FEET, key=lambda f: px[f] * np.sign(v[0]))
            return back
        return "l_foot"

    def _columns(self) -> list:
        m = self.model
        cols = ["t", "phase", "swing"]
        cols += [f"q_{n}" for n in m.coordinate_names] + [f"qdot_{n}" for n in m.coordinate_names]
        cols += [f"tau_cmd_{n}" for n in m.actuated_names] + [f"tau_del_{n}" for n in m.actuated_names]
        cols += [f"lam_{f}_{a}" for f in FEET for a in _AXES]
        cols += ["F_int_ref", "F_int_act", "F_int_plant"]
        cols += ["com_x", "com_y", "com_z", "com_x_ref", "com_y_ref", "com_z_ref", "com_xdot", "com_ydot",
                 "pitch", "pitch_ref", "roll", "roll_ref"]
        cols += [f"swing_{a}" for a in _AXES] + [f"swing_ref_{a}" for a in _AXES]
        return cols

    def _coord(self, state, name):
        return float(state.q[self.model.coordinate(name)]) if name in self.model.coordinate_names else 0.0

    def _contact_set(self, kin, terms, feet):
        cs = [self.foot_contacts[f] for f in feet] + self.lock_contacts
        return contact_set_from_kinematics(kin, terms, cs)

    def _com(self, kin):
        c, J, _ = kin.com(self.rows)
        v = J @ kin.state.qdot
        if self.model.mode == "planar":
            return np.array([c[0], 0.0, c[1]]), np.array([v[0], 0.0, v[1]])
        return c, v

    def _foot(self, kin, f):
        p, J, _ = kin.named_point(f, (0, 1, 2))
        return p, J @ kin.state.qdot

    def _set_com_refs(self, t):
        if self.com_ref_kind != "ellipse":
            return
        amp, period, ramp = self.ellipse
        centre = self.com0[[0, 2]]
        x, v, a = ellipse_reference(t, centre, amp, period, ramp)
        if "COM_x" in self.tasks:
            self.tasks["COM_x"].set_reference(x[:1], v[:1], a[:1])
        if "COM_z" in self.tasks:
            self.tasks["COM_z"].set_reference(x[1:], v[1:], a[1:])

    # --- phase actions -----------------------------------------------------------------------

    def _dual_command(self, kin, terms, dt):
        tasks = [self.tasks[k] for k in self.dual_names]
        for k in self.dual_names:
            apply_gains(self.tasks[k], self.table_dual[k])
        cs = self._contact_set(kin, terms, FEET)
        return whole_body_command(kin, terms, tasks, cs, self.internal, dt=dt, omit_coriolis=self.omit_coriolis,
                                  tau_sensor=self.tau_del), cs

    def _single_tasks(self, swing):
        for k in self.single_names:
            apply_gains(self.tasks[k], self.table_single[k])
        return [self.tasks[k] for k in self.single_names] + [self.foot_tasks[swing]]

    def _freeze_swing(self, kin, swing):
        p, _ = self._foot(kin, swing)
        self.foot_tasks[swing].set_reference(p[self.foot_rows])

    def _start_transition(self, kin, terms, direction):
        swing = self.phases.swing
        info, cs = self._dual_command(kin, terms, 0.0)
        f_ext = swing_reaction(terms, cs, info.tau, self.model.U, swing)
        rows = [self.rows.index(r) for r in self.foot_rows]
        self.trans = TransitionState(direction, self.phases.times.transition, kin.state.time, f_ext[rows])

    def _on_phase(self, phase, kin, terms):
        ph = self.phases
        swing = ph.swing
        t = kin.state.time
        if phase == sm.TRANSITION_LIFT:
            self.foot_tasks[swing].reset()
            self._freeze_swing(kin, swing)
            self._start_transition(kin, terms, LIFTING)
        elif phase == sm.LIFTING:
            if not ph.transitions:
                self.foot_tasks[swing].reset()
            if swing in self.world.contact_names:
                self.world.remove_contact(swing)
            p, _ = self._foot(kin, swing)
            start = p[self.foot_rows]
            target = self._initial_target(kin, p)
            self.swing_traj = SwingTrajectory(start, target, t, ph.times.lifting, ph.times.landing, self.apex,
                                              self.touchdown_speed, rows=self.foot_rows)
            self.planned = False
            self.sea.set_gains(self.kp_swing_for(swing), self.ki_swing_for(swing))
        elif phase == sm.LANDING:
            pass
        elif phase == sm.TRANSITION_LAND:
            self.sea.set_gains(self.kp_default, self.ki_default)
            self._start_transition(kin, terms, LANDING)
        elif phase == sm.DUAL:
            self.sea.set_gains(self.kp_default, self.ki_default)
            self.trans = None

    def kp_swing_for(self, swing):
        return self._mix(self.kp_swing, self.kp_default, swing)

    def ki_swing_for(self, swing):
        return self._mix(self.ki_swing, self.ki_default, swing)

    def _mix(self, swing_vals, default_vals, swing):
        side = swing[0]
        mask = np.array([n.startswith(side + "_") for n in self.names])
        return np.where(mask, swing_vals, default_vals)

    def _initial_target(self, kin, p_swing):
        """Swing target before any plan: back where the foot lifted (stepping) or under the COM."""
        target = p_swing.copy()
        if self.name == "undirected_walking":
            c, _ = self._com(kin)
            target[0] = c[0]
            if self.model.mode == "spatial":
                target[1] = p_swing[1]
            target[2] = self.terrain.height(target)
        return target[self.foot_rows]

    # --- planner -----------------------------------------------------------------------------

    def _measure(self, kin):
        c, v = self._com(kin)
        if self.com_noise > 0:
            c = c + self.com_noise * self.rng.standard_normal(3)
        return c, v

    def _observe(self, kin):
        if self.plan_params is None:
            return None
        c, v = self._measure(kin)
        stance = self.phases.stance if self.phases.single_support else None
        out = {}
        for k, a in enumerate(self.observers):
            i = _AXES.index(a)
            if stance is None:
                self.observers[a].reset()
                out[a] = (c[i], v[i])
                continue
            foot = self._foot(kin, stance)[0][i]
            out[a] = self.observers[a].update(foot, c[i], v[i])
        return out

    def _plan(self, kin, est):
        ph = self.phases
        pp = self.plan_params
        t = kin.state.time
        stance_p, _ = self._foot(kin, ph.stance)
        remaining = pp.switch_remaining(ph.clock(t))
        sx = PipmState(t, est["x"][0], est["x"][1], stance_p[0])
        if self.model.mode == "spatial":
            sy = PipmState(t, est["y"][0], est["y"][1], stance_p[1])
            plan = plan_3d(sx, sy, self.surface, self.surface, pp, remaining)
            p_y = plan.p_y
            if ph.swing == "l_foot":
                p_y = max(p_y, stance_p[1] + self.min_width)
            else:
                p_y = min(p_y, stance_p[1] - self.min_width)
            target = np.array([plan.p_x, p_y, 0.0])
        else:
            plan = plan_1d(sx, remaining, self.surface, pp)
            target = np.array([plan.p_x, 0.0, 0.0])
        target[2] = self.terrain.height(target)
        step = ph.steps + 1
        self.plan_log.add(step, t, plan, "x")
        if plan.y is not None:
            self.plan_log.add(step, t, plan, "y")
        self.swing_traj.retarget(t, target[self.foot_rows])
        if plan.adjustment != "none":
            # lateral timing changed: move the landing end of the curve
            self.swing_traj.reschedule(t, t + plan.switch_time, target[self.foot_rows])

    # --- main loop ---------------------------------------------------------------------------

    def _command(self, kin, terms, t):
        ph = self.phases
        if ph is None or ph.phase == sm.DUAL:
            info, _ = self._dual_command(kin, terms, self.control_dt)
            return info
        swing = ph.swing
        tasks = self._single_tasks(swing)
        cs = self._contact_set(kin, terms, [ph.stance])
        if ph.phase in (sm.TRANSITION_LIFT, sm.TRANSITION_LAND):
            return transition_command(kin, terms, tasks, cs, f"swing:{swing}", self.trans, t, dt=self.control_dt,
                                      omit_coriolis=self.omit_coriolis)
        pos, vel, acc = self.swing_traj(t)
        self.foot_tasks[swing].set_reference(pos, vel, acc)
        return whole_body_command(kin, terms, tasks, cs, dt=self.control_dt, omit_coriolis=self.omit_coriolis)

    def _arm_watch(self):
        active = set(self.world.contact_names)
        ph = self.phases
        skip = set()
        if ph is not None and ph.phase in (sm.TRANSITION_LIFT, sm.LIFTING):
            skip.add(ph.swing)
        self.world.watch = [f for f in FEET if f not in active and f not in skip]

    def _stance_feet(self):
        ph = self.phases
        if ph is None or ph.phase == sm.DUAL:
            return set(FEET)
        return {ph.stance}

    def run(self) -> RunResult:
        status = "completed"
        error = None
        n_ticks = int(round(self.duration / self.control_dt))
        k = 0
        try:
            for k in range(n_ticks):
                if self._tick(k):
                    break
        except SimulationDivergedError as exc:
            status, error = "error", {"type": type(exc).__name__, "message": str(exc), "state": exc.state_dump}
        except PointfootError as exc:
            # a controller breakdown (singular contacts etc.) only happens once the robot has collapsed
            status = "fall"
            self.fall_reason = f"controller: {type(exc).__name__}: {exc}"
        if self.fall_reason is not None and status == "completed":
            status = "fall"
        return self._result(status, error)

    def _tick(self, k) -> bool:
        m = self.model
        world = self.world
        t = world.t
        state = world.state
        kin_true = Kinematics(m, state)
        kin = kin_true
        if self.sensing is not None and k > 0:
            kin = Kinematics(m, self.sensing.update(state))
        terms = kin.terms(include_rotor_inertia=True)
        ph = self.phases
        if ph is not None:
            new = ph.update(t)
            if new is not None:
                self._on_phase(new, kin, terms)
        self._set_com_refs(t)
        est = self._observe(kin)
        if (ph is not None and self.plan_params is not None and ph.phase == sm.LIFTING and not self.planned
                and ph.clock(t) >= self.plan_params.trigger_fraction * ph.times.lifting - 1e-12):
            self._plan(kin, est)
            self.planned = True

        info = self._command(kin, terms, t)
        tau_cmd = info.tau
        jump = 0.0 if self.tau_cmd_prev is None else float(np.abs(tau_cmd - self.tau_cmd_prev).max())
        self.tau_cmd_prev = tau_cmd.copy()
        qd_act = state.qdot[m.n_base:]
        self.tau_del = self.sea.deliver(tau_cmd, qd_act, self.control_dt)

        self._arm_watch()
        stance_before = self._stance_feet()
        events = world.advance(self.tau_del, self.n_sub)
        done = False
        for ev in events:
            self.events.append({"t": ev.t, "kind": ev.kind, "name": ev.name})
            if ev.kind == "touchdown":
                if ph is not None and ev.name == ph.swing and ph.swing_airborne:
                    self._touchdown(ev)
                continue
            if ev.name in stance_before:
                self.fall_reason = f"{ev.kind}: {ev.name} at t = {ev.t:.4f}"
                done = True
        self._record(k, t, state, kin_true, info, tau_cmd, jump)
        done = done or self._check_fall()
        if ph is not None and ph.steps >= self.steps_target and ph.phase == sm.DUAL:
            done = True
        return done

    def _touchdown(self, ev):
        ph = self.phases
        kin = Kinematics(self.model, self.world.state)
        terms = kin.terms(include_rotor_inertia=True)
        swing = ph.swing
        p, _ = self._foot(kin, swing)
        self.p_last[swing] = p
        if self.plan_log is not None:
            self.plan_log.set_achieved(ph.steps + 1, float(p[0]), "x")
            if self.model.mode == "spatial":
                self.plan_log.set_achieved(ph.steps + 1, float(p[1]), "y")
        self.foot_tasks[swing].set_reference(p[self.foot_rows])
        new = ph.update(ev.t, touchdown=True)
        self.touchdowns += 1
        if new is not None:
            self._on_phase(new, kin, terms)

    def _check_fall(self) -> bool:
        if self.fall_reason is not None:
            return True
        s = self.world.state
        c = Kinematics(self.model, s).com((2,))[0][0]
        pitch = self._coord(s, "base_pitch")
        roll = self._coord(s, "base_roll")
        if c < self.com_min:
            self.fall_reason = f"COM height {c:.3f} below {self.com_min}"
        elif abs(pitch) > self.pitch_max:
            self.fall_reason = f"pitch {pitch:.3f} beyond +-{self.pitch_max}"
        elif abs(roll) > self.roll_max:
            self.fall_reason = f"roll {roll:.3f} beyond +-{self.roll_max}"
        return self.fall_reason is not None

    # --- logging -----------------------------------------------------------------------------

    def _plant_internal_force(self, kin):
        forces = self.world.contact_forces()
        if not all(f in forces for f in FEET):
            return np.nan
        P = [kin.named_point(f, (0, 1, 2))[0] for f in FEET]
        W = build_W_int(P[0], P[1])
        F = np.concatenate([forces[f] for f in FEET])
        return float((W @ F)[0])

    def _record(self, k, t, state, kin, info, tau_cmd, jump):
        c, v = self._com(kin)
        ref = {key: (task.x_ref[0] if task.x_ref is not None else np.nan) for key, task in self.tasks.items()}
        cx_ref = ref.get("COM_x", np.nan)
        cz_ref = ref.get("COM_z", np.nan)
        pitch = self._coord(state, "base_pitch")
        roll = self._coord(state, "base_roll")
        kin_after = Kinematics(self.model, self.world.state)
        F_plant = self._plant_internal_force(kin_after) if self.internal is not None else np.nan
        s = self.series
        s["t"].append(t)
        s["com_x_err"].append(c[0] - cx_ref)
        s["com_z_err"].append(c[2] - cz_ref)
        e = [c[2] - cz_ref] + ([c[0] - cx_ref] if "COM_x" in self.tasks else [])
        s["com_err"].append(float(np.linalg.norm(e)))
        s["pitch_err"].append(pitch - ref.get("pitch", 0.0))
        s["roll_err"].append(roll - ref.get("roll", 0.0) if "roll" in self.tasks else 0.0)
        s["tau_jump"].append(jump)
        s["F_int_plant"].append(F_plant)
        s["F_int_ref"].append(self.internal.F_ref if self.internal is not None else np.nan)
        s["com_speed"].append(float(np.hypot(v[0], v[1])))
        s["phase"].append(self.phases.phase if self.phases is not None else sm.DUAL)
        if self.sensing is not None:
            s["orientation_err"].append(self.sensing.error(state))
        if k % self.log_every:
            return
        ph = self.phases
        forces = self.world.contact_forces()
        lam = []
        for f in FEET:
            fv = forces.get(f)
            if fv is None:
                lam += [np.nan] * 3
            elif len(fv) == 3:
                lam += list(fv)
        swing = ph.swing if ph is not None else None
        if swing is not None:
            sp, _ = self._foot(kin, swing)
            st = self.foot_tasks.get(swing)
            sref = np.full(3, np.nan)
            if st is not None and st.x_ref is not None and ph.single_support:
                sref[self.foot_rows] = st.x_ref
        else:
            sp, sref = np.full(3, np.nan), np.full(3, np.nan)
        row = [t, ph.phase if ph is not None else sm.DUAL, swing or ""]
        row += list(state.q) + list(state.qdot) + list(tau_cmd) + list(self.tau_del) + lam
        row += [info.F_int_ref, info.F_int_act, F_plant]
        row += [c[0], c[1], c[2], cx_ref, ref.get("COM_y", np.nan), cz_ref, v[0], v[1]]
        row += [pitch, ref.get("pitch", np.nan), roll, ref.get("roll", np.nan)]
        row += list(sp) + list(sref)
        self.log_rows.append(row)

    def _result(self, status, error) -> RunResult:
        s = {k: np.asarray(v) for k, v in self.series.items()}
        t = s["t"]
        ph = self.phases
        summary = {
            "scenario": self.name,
            "status": status,
            "fall": status == "fall",
            "fall_reason": self.fall_reason,
            "t_end": float(self.world.t),
            "steps_completed": ph.steps if ph is not None else 0,
            "touchdowns": self.touchdowns,
            "events": self.events,
            "contacts_at_end": self.world.contact_names,
            "envelopes": envelopes(s, self.tasks),
        }
        if self.internal is not None:
            mask = t >= STEADY_STATE_AFTER
            err = np.abs(s["F_int_ref"][mask] - s["F_int_plant"][mask])
            summary["envelopes"]["internal_force_steady_max"] = float(np.nanmax(err)) if err.size else None
        pushes = self.world.pushes
        if pushes:
            summary["push_settling"] = [settling_time(t, s["com_x_err"], p.t_start, p.t_start + p.duration)
                                        for p in pushes]
        if error is not None:
            summary["error"] = error
        return RunResult(self.name, status, summary, self.columns, self.log_rows, self.plan_log, s)


def envelopes(s: dict, tasks: dict) -> dict:
    def amax(key):
        v = np.abs(s[key])
        return float(np.nanmax(v)) if v.size else 0.0

    out = {
        "com_z_error_max": amax("com_z_err"),
        "pitch_error_max": amax("pitch_err"),
        "roll_error_max": amax("roll_err"),
        "com_error_max": amax("com_err"),
        "tau_jump_max": amax("tau_jump"),
        "com_speed_max": amax("com_speed"),
    }
    if "COM_x" in tasks:
        out["com_x_error_max"] = amax("com_x_err")
    if len(s.get("orientation_err", ())):
        out["orientation_error_max"] = amax("orientation_err")
    return out


def settling_time(t, err, t_start, t_end, band=0.05) -> float:
    """Time after the pulse ends until the deviation from the pre-push error stays within ``band`` of its peak."""
    t = np.asarray(t)
    err = np.asarray(err)
    before = t < t_start
    dev = np.abs(err - (err[before][-1] if before.any() else 0.0))
    after = ~before
    if not after.any():
        return float("nan")
    peak = dev[after].max()
    outside = np.nonzero(after & (dev > band * peak))[0]
    if peak <= 0 or outside.size == 0:
        return 0.0
    return float(max(t[outside[-1]] - t_end, 0.0))


def run_scenario(name: str, config: dict) -> RunResult:
    """Run one scenario to completion, fall or error."""
    return ScenarioRunner(name, config).run()


# --- output ----------------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_outputs(result: RunResult, out_dir, resolved_config: dict | None = None, overrides=()):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "timeseries.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([_fmt(v) for v in row])
    if result.plan_log is not None:
        result.plan_log.write(out / "plan_log.csv")
    write_summary(out / "summary.json", result.summary, resolved_config, overrides)


def write_summary(path, summary: dict, resolved_config=None, overrides=()):
    doc = dict(summary)
    if resolved_config is not None:
        doc["resolved_config"] = resolved_config
    doc["overrides"] = list(overrides)
    Path(path).write_text(json.dumps(doc, indent=2, default=_json_default, allow_nan=True) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")
