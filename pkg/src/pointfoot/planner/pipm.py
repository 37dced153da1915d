"""Constant time to velocity reversal footstep planner over the prismatic
inverted pendulum (PIPM)."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from pointfoot.errors import ConfigError, PlannerError, SingularSurfaceError
from pointfoot.planner import kernels

log = logging.getLogger(__name__)

G = 9.81
DENOMINATOR_EPS = 1e-9
DT = 1e-3
P_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class HeightSurface:
    """z = h(x) as a piecewise polynomial (ascending coefficients per segment)."""

    breaks: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        breaks = np.asarray(self.breaks, dtype=float)
        coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if breaks.shape != (coeffs.shape[0] + 1,):
            raise ConfigError("a surface with m segments needs m + 1 breakpoints")
        if np.any(np.diff(breaks) <= 0):
            raise ConfigError("surface breakpoints must increase")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "coeffs", coeffs)
        for i, b in enumerate(breaks[1:-1], start=1):
            left = _poly_derivs(coeffs[i - 1], b)
            right = _poly_derivs(coeffs[i], b)
            if not np.allclose(left, right, rtol=1e-9, atol=1e-9):
                raise ConfigError(f"surface is not C2 at x = {b}: (h, h', h'') jumps from {left} to {right}")

    @classmethod
    def flat(cls, z) -> "HeightSurface":
        return cls(np.array([-np.inf, np.inf]), np.array([[float(z)]]))

    @classmethod
    def polynomial(cls, coeffs) -> "HeightSurface":
        return cls(np.array([-np.inf, np.inf]), np.atleast_2d(coeffs))

    def __call__(self, x) -> tuple:
        """(h, h', h'') at x."""
        return kernels.surface_eval(self.breaks, self.coeffs, float(x))

    def to_dict(self) -> dict:
        return {"breaks": [None if not np.isfinite(b) else float(b) for b in self.breaks],
                "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "HeightSurface":
        if "z" in doc:
            return cls.flat(doc["z"])
        b = doc.get("breaks")
        if b is None:
            return cls.polynomial(doc["coeffs"])
        b = [(-np.inf if k == 0 else np.inf) if v is None else v for k, v in enumerate(b)]
        return cls(np.array(b, dtype=float), np.array(doc["coeffs"], dtype=float))


def _poly_derivs(c, x):
    p = np.polynomial.polynomial
    return np.array([p.polyval(x, c), p.polyval(x, p.polyder(c)), p.polyval(x, p.polyder(c, 2))])


@dataclass
class PipmState:
    t: float
    x: float
    xdot: float
    foot: float

    def copy(self, **kw) -> "PipmState":
        d = asdict(self)
        d.update(kw)
        return PipmState(**d)


@dataclass(frozen=True)
class PlanParams:
    t_prime: float = 0.25
    impact_bias: float = -0.01
    impact_bias_y: float = 0.0
    lifting: float = 0.23
    landing: float = 0.26
    transition: float = 0.02
    dual: float = 0.079
    include_transition: bool = False
    trigger_fraction: float = 0.8
    y_dot_max: float = 0.65
    y_dot_min: float = 0.1
    max_extension: float = 0.3
    dual_coast: float = 0.0
    reach: float = 0.35
    reach_y: float = 0.35
    dt: float = DT
    gravity: float = G

    def problems(self) -> list:
        out = []
        if not self.t_prime > 0:
            out.append(("t_prime", "must be positive"))
        for name in ("lifting", "landing", "transition", "dual", "reach", "reach_y", "dt"):
            if not getattr(self, name) > 0:
                out.append((name, "must be positive"))
        if not self.y_dot_max > self.y_dot_min > 0:
            out.append(("y_dot_max", "need y_dot_max > y_dot_min > 0"))
        if not 0 < self.trigger_fraction <= 1:
            out.append(("trigger_fraction", "must lie in (0, 1]"))
        if self.max_extension < 0:
            out.append(("max_extension", "must be non-negative"))
        if self.dual_coast < 0:
            out.append(("dual_coast", "must be non-negative"))
        return out

    def validate(self) -> "PlanParams":
        probs = self.problems()
        if probs:
            raise ConfigError("invalid planner parameters: " + "; ".join(f"{k}: {m}" for k, m in probs),
                              problems=probs)
        return self

    def switch_remaining(self, lifting_elapsed) -> float:
        """Time from now to the projected foot switch (end of landing)."""
        rem = max(self.lifting - lifting_elapsed, 0.0) + self.landing
        return rem + (self.transition if self.include_transition else 0.0)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    status: str

    @property
    def final(self) -> tuple:
        return float(self.t[-1]), float(self.x[-1]), float(self.xdot[-1])


_STATUS = {kernels.DONE: "done", kernels.REVERSED: "reversed", kernels.SPEED_LIMIT: "speed-limit",
           kernels.SINGULAR: "singular"}


def pipm_accel(s: PipmState, surface: HeightSurface, g=G, eps=DENOMINATOR_EPS) -> float:
    """xdd = (g + h'' xdot^2) / (z - (x - x_p) h') * (x - x_p)."""
    h, dh, ddh = surface(s.x)
    den = h - (s.x - s.foot) * dh
    if abs(den) < eps or h <= 0:
        raise SingularSurfaceError(f"PIPM denominator {den:.3g} (z = {h:.3g}) at x = {s.x:.4f}, foot {s.foot:.4f}")
    return (g + ddh * s.xdot ** 2) / den * (s.x - s.foot)


def integrate_pipm(s0: PipmState, surface: HeightSurface, T, until="time", level=0.0, dt=DT, g=G) -> Trajectory:
    """RK4 trajectory over at most T seconds.

    ``until`` is "time", "reversal" (velocity zero crossing) or "speed"
    (|xdot| reaching ``level``). A singular surface truncates the trajectory
    and sets status "singular".
    """
    mode = {"time": kernels.PLAIN, "reversal": kernels.STOP_ON_REVERSAL, "speed": kernels.STOP_ON_SPEED}[until]
    _, _, _, status, ts, xs, vs = kernels.integrate(float(s0.x), float(s0.xdot), float(s0.foot), float(T), dt,
                                                    surface.breaks, surface.coeffs, g, DENOMINATOR_EPS, mode,
                                                    float(level), True)
    return Trajectory(ts + s0.t, xs.copy(), vs.copy(), _STATUS[status])


def switching_state(s_now: PipmState, remaining, surface: HeightSurface, params: PlanParams = PlanParams(),
                    axis="x") -> PipmState:
    """Predicted COM state at the foot switch, ``remaining`` seconds from now."""
    if remaining <= 0:
        return s_now.copy()
    tr = integrate_pipm(s_now, surface, remaining, dt=params.dt, g=params.gravity)
    if tr.status == "singular":
        raise PlannerError(f"singular surface while predicting the switch at t = {tr.t[-1]:.3f}", axis=axis)
    t, x, v = tr.final
    return PipmState(t, x, v, s_now.foot)


def apply_impact(s_switch: PipmState, bias) -> PipmState:
    return s_switch.copy(xdot=s_switch.xdot + bias)


@dataclass
class FootstepResult:
    p: float
    saturated: bool
    residual_velocity: float
    status: str


def find_footstep(post: PipmState, surface: HeightSurface, t_prime, reach, dt=DT, g=G, tol=P_TOL,
                  axis="x") -> FootstepResult:
    """Foot location reversing the velocity exactly ``t_prime`` after the switch.

    Bisects over [x - reach, x + reach]; with no sign change the closer end
    is returned and flagged as saturated.
    """
    if post.xdot == 0.0 and surface(post.x)[1] == 0.0:
        return FootstepResult(float(post.x), False, 0.0, "done")
    p, v, sat, status = kernels.bisect_footstep(float(post.x), float(post.xdot), float(t_prime),
                                                float(post.x - reach), float(post.x + reach), dt,
                                                surface.breaks, surface.coeffs, g, DENOMINATOR_EPS, tol)
    if status == kernels.SINGULAR:
        raise PlannerError("singular surface during footstep search", axis=axis)
    if sat:
        log.warning("[%s] footstep saturated at %.4f (residual velocity %.4f m/s)", axis, p, v)
    return FootstepResult(float(p), bool(sat), float(v), "saturated" if sat else "done")


@dataclass
class AxisPlan:
    switching: PipmState
    post_impact: PipmState
    footstep: FootstepResult
    reversal: PipmState


@dataclass
class FootstepPlan:
    p_x: float
    switch_time: float
    x: AxisPlan
    p_y: float | None = None
    y: AxisPlan | None = None
    adjustment: str = "none"

    @property
    def saturated(self) -> bool:
        return self.x.footstep.saturated or (self.y is not None and self.y.footstep.saturated)


def _plan_axis(s_now, remaining, surface, params, bias, reach, axis) -> AxisPlan:
    sw = switching_state(s_now, remaining, surface, params, axis)
    post = apply_impact(sw, bias)
    if params.dual_coast > 0:
        # both feet down: the COM keeps its velocity until the old stance foot lifts
        post = post.copy(t=post.t + params.dual_coast, x=post.x + post.xdot * params.dual_coast)
    fs = find_footstep(post, surface, params.t_prime, reach, params.dt, params.gravity, axis=axis)
    rev = post.copy(foot=fs.p)
    tr = integrate_pipm(rev, surface, params.t_prime, dt=params.dt, g=params.gravity)
    t, x, v = tr.final
    return AxisPlan(sw, post, fs, PipmState(t, x, v, fs.p))


def plan_1d(s_now: PipmState, remaining, surface: HeightSurface, params: PlanParams) -> FootstepPlan:
    ax = _plan_axis(s_now, remaining, surface, params, params.impact_bias, params.reach, "x")
    return FootstepPlan(ax.footstep.p, remaining, ax)


def plan_3d(s_x: PipmState, s_y: PipmState, surface_x: HeightSurface, surface_y: HeightSurface,
            params: PlanParams, remaining) -> FootstepPlan:
    """Lateral axis first; it may shorten or extend the step, then x uses that switch time."""
    adjustment = "none"
    g, dt = params.gravity, params.dt
    if abs(s_y.xdot) >= params.y_dot_max:
        remaining, adjustment = 0.0, "shortened"
    elif remaining > 0:
        tr = integrate_pipm(s_y, surface_y, remaining, until="speed", level=params.y_dot_max, dt=dt, g=g)
        if tr.status == "singular":
            raise PlannerError("singular surface while predicting the switch", axis="y")
        if tr.status == "speed-limit":
            remaining, adjustment = tr.t[-1] - s_y.t, "shortened"
        elif abs(tr.xdot[-1]) < params.y_dot_min and params.max_extension > 0:
            s_end = PipmState(tr.t[-1], tr.x[-1], tr.xdot[-1], s_y.foot)
            ext = integrate_pipm(s_end, surface_y, params.max_extension, until="speed", level=params.y_dot_min,
                                 dt=dt, g=g)
            if ext.status == "singular":
                raise PlannerError("singular surface while extending the step", axis="y")
            remaining, adjustment = ext.t[-1] - s_y.t, "extended"
    y = _plan_axis(s_y, remaining, surface_y, params, params.impact_bias_y, params.reach_y, "y")
    x = _plan_axis(s_x, remaining, surface_x, params, params.impact_bias, params.reach, "x")
    return FootstepPlan(x.footstep.p, remaining, x, y.footstep.p, y, adjustment)


@dataclass
class PipmObserver:
    """Fixed-gain observer: PIPM prediction corrected toward measured position and velocity."""

    surface: HeightSurface
    gain_x: float = 0.2
    gain_v: float = 0.2
    dt: float = DT
    x: float | None = None
    v: float | None = None

    def update(self, foot, x_meas, v_meas) -> tuple:
        if self.x is None:
            self.x, self.v = float(x_meas), float(v_meas)
            return self.x, self.v
        xn, vn, ok = kernels.rk4_step(self.x, self.v, float(foot), self.dt, self.surface.breaks,
                                      self.surface.coeffs, G, DENOMINATOR_EPS)
        if not ok:
            xn, vn = self.x + self.dt * self.v, self.v
        self.x = xn + self.gain_x * (x_meas - xn)
        self.v = vn + self.gain_v * (v_meas - vn)
        return self.x, self.v

    def reset(self):
        self.x = self.v = None


PLAN_LOG_COLUMNS = ["step", "trigger_time", "switch_t", "switch_x", "switch_xdot", "post_x", "post_xdot",
                    "p_planned", "p_achieved", "reversal_t", "reversal_x", "reversal_xdot", "saturated", "axis",
                    "adjustment"]


@dataclass
class PlanLog:
    rows: list = field(default_factory=list)

    def add(self, step, trigger_time, plan: FootstepPlan, axis="x"):
        ap = plan.x if axis == "x" else plan.y
        self.rows.append({
            "step": step, "trigger_time": trigger_time,
            "switch_t": ap.switching.t, "switch_x": ap.switching.x, "switch_xdot": ap.switching.xdot,
            "post_x": ap.post_impact.x, "post_xdot": ap.post_impact.xdot,
            "p_planned": ap.footstep.p, "p_achieved": np.nan,
            "reversal_t": ap.reversal.t, "reversal_x": ap.reversal.x, "reversal_xdot": ap.reversal.xdot,
            "saturated": int(ap.footstep.saturated), "axis": axis, "adjustment": plan.adjustment,
        })

    def set_achieved(self, step, p, axis="x"):
        for r in reversed(self.rows):
            if r["step"] == step and r["axis"] == axis:
                r["p_achieved"] = p
                return

    def write(self, path):
        with open(Path(path), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=PLAN_LOG_COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow(r)
