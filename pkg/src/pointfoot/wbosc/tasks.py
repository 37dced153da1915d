"""Operational tasks with PID acceleration laws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointfoot.errors import ConfigError, ModelError
from pointfoot.model import Kinematics

TASK_KINDS = ("com-height", "com-planar-position", "body-pitch", "body-roll", "foot-position")
_AXIS = {"x": 0, "y": 1, "z": 2}


def _vec(v, d):
    a = np.asarray(v, dtype=float)
    return np.full(d, float(a)) if a.ndim == 0 else a.copy()


@dataclass
class Task:
    """One operational task.

    ``kp``, ``ki``, ``kd`` are the position, integral and derivative gains
    (K_x, I_x, D_x). The command is ``u = a_ref + kp e + ki int(e) + kd edot``
    with ``e = x_ref - x``.
    """

    name: str
    kind: str
    kp: np.ndarray | float = 0.0
    ki: np.ndarray | float = 0.0
    kd: np.ndarray | float = 0.0
    point: str | None = None
    axes: tuple | None = None
    integral_limit: float = np.inf
    x_ref: np.ndarray | None = None
    v_ref: np.ndarray | None = None
    a_ref: np.ndarray | None = None
    feedforward: np.ndarray | None = None
    integral: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"task {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "foot-position" and not self.point:
            raise ConfigError(f"task {self.name!r}: foot-position needs a point name")
        if self.axes is not None:
            self.axes = tuple(self.axes)
            bad = [a for a in self.axes if a not in _AXIS]
            if bad:
                raise ConfigError(f"task {self.name!r}: unknown axes {bad}")
        for gain in ("kp", "ki", "kd"):
            if np.any(np.asarray(getattr(self, gain)) < 0):
                raise ConfigError(f"task {self.name!r}: gain {gain} must be non-negative")

    def resolved_axes(self, model) -> tuple:
        if self.kind == "com-height":
            return ("z",)
        if self.kind in ("body-pitch", "body-roll"):
            return ("r",)
        if self.axes is not None:
            return self.axes
        if self.kind == "com-planar-position":
            return ("x",) if model.mode == "planar" else ("x", "y")
        return ("x", "z") if model.mode == "planar" else ("x", "y", "z")

    def dim(self, model) -> int:
        return len(self.resolved_axes(model))

    def kinematics(self, kin: Kinematics) -> tuple:
        """(x, J, Jdot*qdot) of the task coordinates."""
        model = kin.model
        if self.kind in ("body-pitch", "body-roll"):
            coord = "base_pitch" if self.kind == "body-pitch" else "base_roll"
            if coord not in model.coordinate_names:
                raise ModelError(f"task {self.name!r}: model {model.name!r} has no {coord}")
            k = model.coordinate(coord)
            J = np.zeros((1, model.n_dofs))
            J[0, k] = 1.0
            return kin.state.q[k:k + 1].copy(), J, np.zeros(1)
        rows = [_AXIS[a] for a in self.resolved_axes(model)]
        if model.mode == "planar" and 1 in rows:
            raise ModelError(f"task {self.name!r}: no y axis in planar mode")
        if self.kind == "foot-position":
            return kin.named_point(self.point, rows)
        return kin.com(rows)

    def set_reference(self, x, v=None, a=None):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self.x_ref = x
        self.v_ref = np.zeros_like(x) if v is None else np.atleast_1d(np.asarray(v, dtype=float))
        self.a_ref = np.zeros_like(x) if a is None else np.atleast_1d(np.asarray(a, dtype=float))

    def reset(self):
        """Zero the integral state; called on every task-set switch."""
        self.integral = None

    def command(self, x, v, dt=0.0) -> np.ndarray:
        """PID acceleration command; ``dt > 0`` advances the integral state."""
        d = len(x)
        if self.x_ref is None:
            self.set_reference(x)
        e = self.x_ref - x
        edot = self.v_ref - v
        if self.integral is None:
            self.integral = np.zeros(d)
        if dt > 0:
            self.integral = np.clip(self.integral + e * dt, -self.integral_limit, self.integral_limit)
        return self.a_ref + _vec(self.kp, d) * e + _vec(self.ki, d) * self.integral + _vec(self.kd, d) * edot


def stack_tasks(tasks, kin: Kinematics) -> tuple:
    """Stacked (x, J, Jdot*qdot, slices) for a flat task set."""
    xs, Js, jds, slices = [], [], [], {}
    start = 0
    for t in tasks:
        x, J, jd = t.kinematics(kin)
        xs.append(x)
        Js.append(J)
        jds.append(jd)
        slices[t.name] = slice(start, start + len(x))
        start += len(x)
    n = kin.model.n_dofs
    if not tasks:
        return np.zeros(0), np.zeros((0, n)), np.zeros(0), slices
    return np.concatenate(xs), np.vstack(Js), np.concatenate(jds), slices
