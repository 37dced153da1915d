"""Contact-constrained dynamics: support Jacobian, its dynamically consistent
inverse and null-space projector.

Dynamics convention used throughout::

    A qdd + b + g + J_s^T lam = U^T tau,     J_s qdd + Jdot_s qdot = 0

so ``lam`` is the force the robot exerts on the environment at each contact
(a robot standing still has vertical components summing to minus its weight).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointfoot.errors import ModelError, SingularContactError
from pointfoot.model import DynamicsTerms, Kinematics

CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class Contact:
    """A body point held fixed, or a generalized coordinate held fixed (``lock``)."""

    name: str
    body: int = -1
    offset: tuple = (0.0, 0.0, 0.0)
    lock: int = -1

    @property
    def is_lock(self) -> bool:
        return self.lock >= 0


def point_contact(model, point_name: str) -> Contact:
    body, offset = model.point(point_name)
    return Contact(point_name, body, tuple(offset))


def coordinate_lock(model, coordinate: str) -> Contact:
    return Contact(f"lock:{coordinate}", lock=model.coordinate(coordinate))


@dataclass
class ContactSet:
    contacts: tuple
    J_s: np.ndarray
    Jdot_s_qdot: np.ndarray
    Lambda_s: np.ndarray
    Jbar_s: np.ndarray
    N_s: np.ndarray
    A_inv: np.ndarray
    slices: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.J_s.shape[0]

    @property
    def point_names(self) -> list:
        return [c.name for c in self.contacts if not c.is_lock]

    def rows_of(self, name: str) -> slice:
        try:
            return self.slices[name]
        except KeyError:
            raise ModelError(f"contact {name!r} is not active") from None


def _inverse(A) -> np.ndarray:
    Ainv = np.linalg.solve(A, np.eye(A.shape[0]))
    return 0.5 * (Ainv + Ainv.T)


def build_contact_set(terms: DynamicsTerms, jacobians, jdot_qdots=None, contacts=None,
                      condition_limit=CONDITION_LIMIT) -> ContactSet:
    """Stack contact Jacobians and form Lambda_s, Jbar_s and N_s.

    ``jacobians`` is a list of row blocks; the matching ``jdot_qdots`` default
    to zero. ``contacts`` labels the blocks (used to find per-contact rows).
    """
    A = terms.A
    n = A.shape[0]
    Ainv = _inverse(A)
    blocks = [np.atleast_2d(np.asarray(J, dtype=float)) for J in jacobians]
    if jdot_qdots is None:
        jdot_qdots = [np.zeros(J.shape[0]) for J in blocks]
    if contacts is None:
        contacts = tuple(Contact(f"c{k}") for k in range(len(blocks)))
    slices = {}
    start = 0
    for c, J in zip(contacts, blocks):
        if J.shape[1] != n:
            raise ModelError(f"contact {c.name!r}: Jacobian has {J.shape[1]} columns, expected {n}")
        slices[c.name] = slice(start, start + J.shape[0])
        start += J.shape[0]
    if not blocks:
        return ContactSet(tuple(contacts), np.zeros((0, n)), np.zeros(0), np.zeros((0, 0)),
                          np.zeros((n, 0)), np.eye(n), Ainv, slices)
    J_s = np.vstack(blocks)
    jd = np.concatenate([np.asarray(v, dtype=float).ravel() for v in jdot_qdots])

    M = J_s @ Ainv @ J_s.T
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > condition_limit:
        raise SingularContactError(
            f"J_s A^-1 J_s^T is singular (condition {sv[0] / max(sv[-1], 1e-300):.3g})", singular_values=sv)
    Lambda_s = np.linalg.solve(M, np.eye(M.shape[0]))
    Lambda_s = 0.5 * (Lambda_s + Lambda_s.T)
    Jbar_s = Ainv @ J_s.T @ Lambda_s
    N_s = np.eye(n) - Jbar_s @ J_s
    return ContactSet(tuple(contacts), J_s, jd, Lambda_s, Jbar_s, N_s, Ainv, slices)


def contact_set_from_kinematics(kin: Kinematics, terms: DynamicsTerms, contacts, rows=None) -> ContactSet:
    """Build a ContactSet for named contacts at the state held by ``kin``.

    Point contacts contribute the model's task rows (x, z in planar mode),
    coordinate locks a single unit row.
    """
    n = kin.model.n_dofs
    Js, jds = [], []
    for c in contacts:
        if c.is_lock:
            row = np.zeros((1, n))
            row[0, c.lock] = 1.0
            Js.append(row)
            jds.append(np.zeros(1))
        else:
            _, J, jd = kin.point(c.body, c.offset, rows)
            Js.append(J)
            jds.append(jd)
    return build_contact_set(terms, Js, jds, tuple(contacts))


def constrained_forward_dynamics(terms: DynamicsTerms, contacts: ContactSet, tau_control, U) -> tuple:
    """(qdd, lam) for actuated torques ``tau_control`` under the active contacts.

    Projected form: qdd = A^-1 N_s^T (U^T tau - b - g) - A^-1 J_s^T Lambda_s Jdot_s qdot,
    lam = Jbar_s^T (U^T tau - b - g) + Lambda_s Jdot_s qdot.
    """
    force = np.asarray(U).T @ np.asarray(tau_control, dtype=float) - terms.b - terms.g
    Ainv = contacts.A_inv
    if contacts.n_rows == 0:
        return Ainv @ force, np.zeros(0)
    lam = contacts.Jbar_s.T @ force + contacts.Lambda_s @ contacts.Jdot_s_qdot
    qdd = Ainv @ (force - contacts.J_s.T @ lam)
    return qdd, lam
