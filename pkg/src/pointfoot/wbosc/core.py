"""Contact-consistent task space quantities.

With ``Phi = U N_s A^-1 N_s^T U^T`` the actuated joints see the constrained
robot through ``UNs_bar = A^-1 N_s^T U^T Phi^+``. A task with Jacobian J_t then
has the contact-consistent Jacobian ``J* = J_t UNs_bar`` and inertia
``Lambda* = (J* Phi J*^T)^-1``. Torques ``tau = J*^T F`` with
``F = Lambda* u + mu* + p*`` give the closed loop ``xdd_task = u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointfoot.errors import IllConditionedTaskError, ModelError
from pointfoot.model import DynamicsTerms
from pointfoot.wbosc.contacts import ContactSet
from pointfoot.wbosc.linalg import damped_pinv

TASK_CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class Projection:
    U: np.ndarray
    Phi: np.ndarray
    Phi_pinv: np.ndarray
    UNs_bar: np.ndarray
    L_star: np.ndarray


def projection(U, contacts: ContactSet) -> Projection:
    U = np.asarray(U, dtype=float)
    UN = U @ contacts.N_s
    Phi = UN @ contacts.A_inv @ UN.T
    Phi = 0.5 * (Phi + Phi.T)
    Phi_pinv = damped_pinv(Phi)
    UNs_bar = contacts.A_inv @ UN.T @ Phi_pinv
    L_star = np.eye(U.shape[0]) - Phi @ Phi_pinv
    return Projection(U, Phi, Phi_pinv, UNs_bar, L_star)


def task_jacobian_star(J_task, proj: Projection) -> np.ndarray:
    J_task = np.atleast_2d(np.asarray(J_task, dtype=float))
    if J_task.shape[1] != proj.UNs_bar.shape[0]:
        raise ModelError(f"task Jacobian has {J_task.shape[1]} columns, expected {proj.UNs_bar.shape[0]}")
    return J_task @ proj.UNs_bar


@dataclass
class TaskForce:
    F: np.ndarray
    J_star: np.ndarray
    Lambda_star: np.ndarray
    mu_star: np.ndarray
    p_star: np.ndarray
    u: np.ndarray


def task_force(J_task, Jdot_task_qdot, u, terms: DynamicsTerms, contacts: ContactSet, proj: Projection,
               omit_coriolis=False, condition_limit=TASK_CONDITION_LIMIT) -> TaskForce:
    """Operational force ``Lambda* u + mu* + p*`` for a (stacked) task.

    ``omit_coriolis`` drops mu*, as done on hardware where velocity-product
    terms were left out.
    """
    J_task = np.atleast_2d(np.asarray(J_task, dtype=float))
    u = np.asarray(u, dtype=float)
    J_star = task_jacobian_star(J_task, proj)
    M = J_star @ proj.Phi @ J_star.T
    M = 0.5 * (M + M.T)
    sv = np.linalg.svd(M, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if cond > condition_limit:
        raise IllConditionedTaskError(f"task inertia is ill-conditioned (condition {cond:.3g})", condition_number=cond)
    Lambda_star = np.linalg.solve(M, np.eye(M.shape[0]))
    Lambda_star = 0.5 * (Lambda_star + Lambda_star.T)

    JAN = J_task @ contacts.A_inv @ contacts.N_s.T
    p_star = Lambda_star @ (JAN @ terms.g)
    if omit_coriolis:
        mu_star = np.zeros(len(u))
    else:
        drift = np.zeros(J_task.shape[1])
        if contacts.n_rows:
            drift = contacts.A_inv @ contacts.J_s.T @ (contacts.Lambda_s @ contacts.Jdot_s_qdot)
        mu_star = Lambda_star @ (JAN @ terms.b - np.asarray(Jdot_task_qdot, dtype=float) + J_task @ drift)
    F = Lambda_star @ u + mu_star + p_star
    return TaskForce(F, J_star, Lambda_star, mu_star, p_star, u)
