"""Whole-body torque command and contact-transition blending."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointfoot.errors import TransitionSetupError
from pointfoot.model import DynamicsTerms, Kinematics
from pointfoot.wbosc.contacts import ContactSet, constrained_forward_dynamics
from pointfoot.wbosc.core import Projection, projection, task_force
from pointfoot.wbosc.internal import (
    InternalForceSpec,
    actual_internal_force,
    build_W_int,
    embed_W_int,
    internal_force_terms,
    internal_torque,
    task_induced_internal_force,
)
from pointfoot.wbosc.tasks import stack_tasks

LIFTING = "lifting"
LANDING = "landing"


@dataclass
class CommandInfo:
    tau: np.ndarray
    tau_task: np.ndarray
    tau_int: np.ndarray
    task_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    task_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    task_slices: dict = field(default_factory=dict)
    F_task: np.ndarray = field(default_factory=lambda: np.zeros(0))
    F_int_ref: float = np.nan
    F_int_act: float = np.nan
    F_int_task: float = np.nan
    projection: Projection | None = None


def whole_body_command(kin: Kinematics, terms: DynamicsTerms, tasks, contacts: ContactSet,
                       internal: InternalForceSpec | None = None, dt=0.0, omit_coriolis=False,
                       f_ext: dict | None = None, tau_sensor=None) -> CommandInfo:
    """``tau = J*^T F_task + L*^T Gamma_int`` for a flat task set.

    ``dt > 0`` advances task integrators. ``f_ext`` adds a force to named task
    rows (used while blending contacts). Internal-force feedback uses
    ``tau_sensor`` (the last delivered torque); without it the loop is open.
    """
    model = kin.model
    U = model.U
    n_act = U.shape[0]
    proj = projection(U, contacts)
    tau_task = np.zeros(n_act)
    info = CommandInfo(tau_task, tau_task, np.zeros(n_act), projection=proj)
    if tasks:
        x, J, jd, slices = stack_tasks(tasks, kin)
        v = J @ kin.state.qdot
        u = np.concatenate([t.command(x[slices[t.name]], v[slices[t.name]], dt) for t in tasks])
        tf = task_force(J, jd, u, terms, contacts, proj, omit_coriolis=omit_coriolis)
        F = tf.F
        for t in tasks:
            if t.feedforward is not None:
                F[slices[t.name]] += t.feedforward
        for name, force in (f_ext or {}).items():
            F[slices[name]] += force
        tau_task = tf.J_star.T @ F
        info.tau_task = tau_task
        info.task_x, info.task_u, info.task_slices, info.F_task = x, u, slices, F

    tau = tau_task.copy()
    if internal is not None:
        planar = model.mode == "planar"
        rows = model.task_rows
        P_R = np.zeros(3)
        P_L = np.zeros(3)
        P_R[list(rows)] = kin.named_point(internal.right)[0]
        P_L[list(rows)] = kin.named_point(internal.left)[0]
        W = embed_W_int(build_W_int(P_R, P_L), contacts, internal.right, internal.left, planar)
        it = internal_force_terms(W, terms, contacts, proj, omit_coriolis=omit_coriolis)
        F_t = task_induced_internal_force(W, contacts, tau_task, U)
        if tau_sensor is None:
            F_act = np.atleast_1d(internal.F_ref)
        else:
            F_act = actual_internal_force(W, contacts, terms, tau_sensor, U)
        tau_int = internal_torque(it, proj, internal.F_ref, F_t, F_act, internal.K_F)
        tau += tau_int
        info.tau_int = tau_int
        info.F_int_ref = float(internal.F_ref)
        info.F_int_act = float(F_act[0])
        info.F_int_task = float(F_t[0])
    info.tau = tau
    return info


@dataclass
class TransitionState:
    """Linear blend of the swing-foot reaction force over ``duration``.

    Lifting runs w from 1 to 0, landing from 0 to 1.
    """

    direction: str
    duration: float
    t_start: float = 0.0
    f_ext_dual: np.ndarray | None = None

    def __post_init__(self):
        if self.direction not in (LIFTING, LANDING):
            raise TransitionSetupError(f"unknown transition direction {self.direction!r}")
        if not self.duration > 0:
            raise TransitionSetupError("transition duration must be positive")

    def weight(self, t) -> float:
        s = min(max((t - self.t_start) / self.duration, 0.0), 1.0)
        return 1.0 - s if self.direction == LIFTING else s

    def finished(self, t) -> bool:
        return t - self.t_start >= self.duration - 1e-12


def swing_reaction(terms: DynamicsTerms, dual: ContactSet, tau_dual, U, swing: str) -> np.ndarray:
    """Constraint force on the swing contact produced by a dual-support command."""
    _, lam = constrained_forward_dynamics(terms, dual, tau_dual, U)
    return lam[dual.rows_of(swing)].copy()


def transition_command(kin: Kinematics, terms: DynamicsTerms, tasks, stance: ContactSet, swing_task: str,
                       trans: TransitionState, t, dt=0.0, omit_coriolis=False) -> CommandInfo:
    """Single-contact command with the swing-foot task loaded by ``w * f_ext_dual``."""
    if trans.f_ext_dual is None:
        raise TransitionSetupError("transition started without a cached dual-support reaction force")
    if swing_task not in [tk.name for tk in tasks]:
        raise TransitionSetupError(f"swing task {swing_task!r} is not in the task set")
    w = trans.weight(t)
    return whole_body_command(kin, terms, tasks, stance, dt=dt, omit_coriolis=omit_coriolis,
                              f_ext={swing_task: w * trans.f_ext_dual})
