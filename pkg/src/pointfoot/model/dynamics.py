"""Mass matrix, bias forces and point Jacobians for a RobotModel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointfoot.errors import ModelError
from pointfoot.model import kernels
from pointfoot.model.robot import RobotModel


@dataclass
class GeneralizedState:
    q: np.ndarray
    qdot: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != self.qdot.shape or self.q.ndim != 1:
            raise ModelError(f"q {self.q.shape} and qdot {self.qdot.shape} must be equal-length vectors")

    def copy(self) -> "GeneralizedState":
        return GeneralizedState(self.q.copy(), self.qdot.copy(), self.time)


@dataclass(frozen=True)
class DynamicsTerms:
    """Joint-space dynamics ``A qdd + b + g = U^T tau`` at one state."""

    A: np.ndarray
    b: np.ndarray
    g: np.ndarray


def _check(model: RobotModel, state: GeneralizedState):
    if state.q.shape != (model.n_dofs,):
        raise ModelError(f"state has {state.q.shape[0]} coordinates, model {model.name!r} has {model.n_dofs}")


class Kinematics:
    """Forward kinematics of one state, shared by every query at that state."""

    def __init__(self, model: RobotModel, state: GeneralizedState):
        _check(model, state)
        self.model = model
        self.state = state
        a = model._arrays
        self._a = a
        self.R, self.p, self.S = kernels.forward_kinematics(a.parent, a.jtype, a.axis, a.E_tree, a.r_tree, state.q)
        self.V, self.Ab = kernels.velocities(a.parent, self.S, state.qdot)
        self._I6 = None

    @property
    def I6(self):
        if self._I6 is None:
            a = self._a
            self._I6 = kernels.spatial_inertias(a.mass, a.com, a.Ic, self.R, self.p)
        return self._I6

    def mass_matrix(self, include_rotor_inertia=False) -> np.ndarray:
        A = kernels.crba(self._a.parent, self.S, self.I6)
        if include_rotor_inertia:
            A[np.diag_indices_from(A)] += self._a.armature
        return A

    def bias_forces(self) -> tuple:
        """(b, g): velocity-product and gravity generalized forces."""
        a = self._a
        zeros = np.zeros(self.model.n_dofs)
        bg = kernels.rnea(a.parent, self.S, self.I6, self.V, self.Ab, self.state.qdot, zeros, self.model.gravity)
        still = np.zeros_like(self.V)
        g = kernels.rnea(a.parent, self.S, self.I6, still, still, zeros, zeros, self.model.gravity)
        return bg - g, g

    def inverse_dynamics(self, qdd, gravity=True) -> np.ndarray:
        a = self._a
        grav = self.model.gravity if gravity else 0.0
        return kernels.rnea(a.parent, self.S, self.I6, self.V, self.Ab, self.state.qdot,
                            np.asarray(qdd, dtype=float), grav)

    def terms(self, include_rotor_inertia=False) -> DynamicsTerms:
        b, g = self.bias_forces()
        return DynamicsTerms(self.mass_matrix(include_rotor_inertia), b, g)

    def point(self, body, offset, rows=None):
        """(position, Jacobian, Jdot*qdot) of a body-fixed point, reduced to ``rows``."""
        rows = self.model.task_rows if rows is None else rows
        body = self.model.body(body)
        pw, J, acc = kernels.point_kinematics(self._a.parent, self.R, self.p, self.S, self.V, self.Ab,
                                              body, np.asarray(offset, dtype=float))
        rows = list(rows)
        return pw[rows], J[rows], acc[rows]

    def named_point(self, name, rows=None):
        body, offset = self.model.point(name)
        return self.point(body, offset, rows)

    def com(self, rows=None):
        rows = self.model.task_rows if rows is None else rows
        a = self._a
        c, J, acc = kernels.com_kinematics(a.parent, a.mass, a.com, self.R, self.p, self.S, self.V, self.Ab)
        rows = list(rows)
        return c[rows], J[rows], acc[rows]

    def body_pose(self, body):
        body = self.model.body(body)
        return self.R[body].copy(), self.p[body].copy()

    def kinetic_energy(self) -> float:
        v = self.state.qdot
        return 0.5 * float(v @ self.mass_matrix() @ v)

    def potential_energy(self) -> float:
        a = self._a
        heights = self.p[:, 2] + np.einsum("ij,ij->i", self.R[:, 2, :], a.com)
        return float(self.model.gravity * (a.mass * heights).sum())


def mass_matrix(model: RobotModel, state: GeneralizedState, include_rotor_inertia=False) -> np.ndarray:
    return Kinematics(model, state).mass_matrix(include_rotor_inertia)


def bias_forces(model: RobotModel, state: GeneralizedState) -> tuple:
    return Kinematics(model, state).bias_forces()


def dynamics_terms(model: RobotModel, state: GeneralizedState, include_rotor_inertia=False) -> DynamicsTerms:
    return Kinematics(model, state).terms(include_rotor_inertia)


def point_jacobian(model: RobotModel, state: GeneralizedState, body, offset) -> np.ndarray:
    """World-frame linear Jacobian of a body point (2 rows planar, 3 spatial)."""
    return Kinematics(model, state).point(body, offset)[1]


def point_position(model: RobotModel, state: GeneralizedState, body, offset) -> np.ndarray:
    return Kinematics(model, state).point(body, offset)[0]


def com_position(model: RobotModel, state: GeneralizedState) -> np.ndarray:
    return Kinematics(model, state).com()[0]


def total_energy(model: RobotModel, state: GeneralizedState) -> float:
    kin = Kinematics(model, state)
    return kin.kinetic_energy() + kin.potential_energy()


def zero_state(model: RobotModel) -> GeneralizedState:
    return GeneralizedState(np.zeros(model.n_dofs), np.zeros(model.n_dofs))


def random_state(model: RobotModel, rng: np.random.Generator, joint_range=1.2, speed=1.0) -> GeneralizedState:
    """Random configuration with moderate base pose and joint angles."""
    n = model.n_dofs
    q = rng.uniform(-joint_range, joint_range, n)
    nb = model.n_base
    q[:nb] = rng.uniform(-0.5, 0.5, nb)
    z = model.coordinate("base_z")
    q[z] = rng.uniform(0.5, 1.5)
    return GeneralizedState(q, rng.normal(0.0, speed, n))
