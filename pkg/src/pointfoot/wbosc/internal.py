"""Internal (inter-foot tension) force sensing and feedback control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointfoot.errors import DegenerateGeometryError, UndefinedInternalForceError
from pointfoot.model import DynamicsTerms
from pointfoot.wbosc.contacts import ContactSet
from pointfoot.wbosc.core import Projection
from pointfoot.wbosc.linalg import damped_pinv

GEOMETRY_EPS = 1e-6


def build_W_int(P_R, P_L, eps=GEOMETRY_EPS) -> np.ndarray:
    """1 x 6 tension selector ``S_t R_t Delta_t`` on stacked reactions (right, left).

    Reaction differences are rotated into a frame whose x axis points from the
    left to the right contact and the x row (the tension) is kept.
    """
    d = np.asarray(P_R, dtype=float) - np.asarray(P_L, dtype=float)
    dist = np.linalg.norm(d)
    if dist <= eps:
        raise DegenerateGeometryError(f"contact points coincide (distance {dist:.3g} m)")
    x_hat = d / dist
    y_hat = np.array([-x_hat[1], x_hat[0], 0.0])
    z_hat = np.cross(x_hat, y_hat)
    R_t = np.vstack([x_hat, y_hat, z_hat])
    Delta_t = np.hstack([np.eye(3), -np.eye(3)])
    S_t = np.array([[1.0, 0.0, 0.0]])
    return S_t @ R_t @ Delta_t


def embed_W_int(W6, contacts: ContactSet, right: str, left: str, planar: bool) -> np.ndarray:
    """Place a 1 x 6 selector on the rows of two named point contacts."""
    W6 = np.atleast_2d(W6)
    if len(contacts.point_names) < 2:
        raise UndefinedInternalForceError("internal forces need two active point contacts")
    cols = [0, 2] if planar else [0, 1, 2]
    W = np.zeros((W6.shape[0], contacts.n_rows))
    W[:, contacts.rows_of(right)] = W6[:, cols]
    W[:, contacts.rows_of(left)] = W6[:, [c + 3 for c in cols]]
    return W


@dataclass
class InternalForceSpec:
    right: str
    left: str
    F_ref: float = 0.0
    K_F: float = 0.0


@dataclass
class InternalForceTerms:
    W: np.ndarray
    Jbar_il: np.ndarray
    J_il: np.ndarray
    mu_i: np.ndarray
    p_i: np.ndarray


def internal_force_terms(W, terms: DynamicsTerms, contacts: ContactSet, proj: Projection,
                         omit_coriolis=False) -> InternalForceTerms:
    Jbar_il = proj.L_star @ proj.U @ contacts.Jbar_s @ W.T
    J_il = damped_pinv(Jbar_il)
    if omit_coriolis:
        mu_i = np.zeros(W.shape[0])
    else:
        mu_i = W @ (contacts.Jbar_s.T @ terms.b - contacts.Lambda_s @ contacts.Jdot_s_qdot)
    p_i = W @ (contacts.Jbar_s.T @ terms.g)
    return InternalForceTerms(W, Jbar_il, J_il, mu_i, p_i)


def actual_internal_force(W, contacts: ContactSet, terms: DynamicsTerms, tau_sensor, U) -> np.ndarray:
    """Internal force implied by sensed joint torques under rigid contacts."""
    if len(contacts.point_names) < 2:
        raise UndefinedInternalForceError("internal forces need two active point contacts")
    force = np.asarray(U).T @ np.asarray(tau_sensor, dtype=float) - terms.b - terms.g
    return W @ (contacts.Jbar_s.T @ force + contacts.Lambda_s @ contacts.Jdot_s_qdot)


def task_induced_internal_force(W, contacts: ContactSet, tau_task, U) -> np.ndarray:
    return W @ (contacts.Jbar_s.T @ (np.asarray(U).T @ tau_task))


def internal_torque(it: InternalForceTerms, proj: Projection, F_ref, F_task_induced, F_act, K_F) -> np.ndarray:
    """Torque ``L*^T Gamma_int`` realising the desired internal force with P feedback."""
    F_ref = np.atleast_1d(np.asarray(F_ref, dtype=float))
    err = F_ref - np.atleast_1d(F_act)
    gamma = it.J_il.T @ (F_ref - np.atleast_1d(F_task_induced) + it.mu_i + it.p_i + K_F * err)
    return proj.L_star.T @ gamma
