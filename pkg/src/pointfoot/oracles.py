"""Brute-force reference computations.

These deliberately take slow, independent routes (finite differences,
column-by-column inverse dynamics, closed forms, Monte-Carlo search) so that
they can check the production code paths rather than mirror them.
"""

from __future__ import annotations

import numpy as np

from pointfoot.model import GeneralizedState, Kinematics, RobotModel


def mass_matrix_by_inverse_dynamics(model: RobotModel, state: GeneralizedState) -> np.ndarray:
    """Column k is the generalized force needed for qdd = e_k at rest, gravity off."""
    still = GeneralizedState(state.q, np.zeros_like(state.qdot))
    kin = Kinematics(model, still)
    n = model.n_dofs
    return np.column_stack([kin.inverse_dynamics(np.eye(n)[k], gravity=False) for k in range(n)])


def point_velocity_fd(model, state, body, offset, h=1e-7) -> np.ndarray:
    """Central difference of the point position along qdot."""
    plus = GeneralizedState(state.q + h * state.qdot, state.qdot)
    minus = GeneralizedState(state.q - h * state.qdot, state.qdot)
    return (Kinematics(model, plus).point(body, offset)[0] - Kinematics(model, minus).point(body, offset)[0]) / (2 * h)


def jacobian_dot_qdot_fd(model, state, body, offset, h=1e-6) -> np.ndarray:
    plus = GeneralizedState(state.q + h * state.qdot, state.qdot)
    minus = GeneralizedState(state.q - h * state.qdot, state.qdot)
    Jp = Kinematics(model, plus).point(body, offset)[1]
    Jm = Kinematics(model, minus).point(body, offset)[1]
    return (Jp - Jm) @ state.qdot / (2 * h)


def potential_gradient_fd(model, state, h=1e-6) -> np.ndarray:
    n = model.n_dofs
    grad = np.empty(n)
    for k in range(n):
        dq = np.zeros(n)
        dq[k] = h
        up = Kinematics(model, GeneralizedState(state.q + dq, state.qdot)).potential_energy()
        down = Kinematics(model, GeneralizedState(state.q - dq, state.qdot)).potential_energy()
        grad[k] = (up - down) / (2 * h)
    return grad


def mass_matrix_rate_fd(model, state, h=1e-6) -> np.ndarray:
    plus = GeneralizedState(state.q + h * state.qdot, state.qdot)
    minus = GeneralizedState(state.q - h * state.qdot, state.qdot)
    return (Kinematics(model, plus).mass_matrix() - Kinematics(model, minus).mass_matrix()) / (2 * h)


def lip_trajectory(x0, xd0, foot, z0, t, g=9.81):
    """Closed-form linear inverted pendulum position and velocity."""
    w = np.sqrt(g / z0)
    x = foot + (x0 - foot) * np.cosh(w * t) + xd0 / w * np.sinh(w * t)
    xd = (x0 - foot) * w * np.sinh(w * t) + xd0 * np.cosh(w * t)
    return x, xd


def lip_reversal_footstep(x0, xd0, t_rev, z0, g=9.81):
    """Foot position making the LIP velocity vanish exactly t_rev later."""
    w = np.sqrt(g / z0)
    return x0 + xd0 / (w * np.tanh(w * t_rev))


def random_unit_quaternions(n, rng) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def quaternion_matrices(qs) -> np.ndarray:
    w, x, y, z = qs[:, 0], qs[:, 1], qs[:, 2], qs[:, 3]
    R = np.empty((qs.shape[0], 3, 3))
    R[:, 0, 0] = w * w + x * x - y * y - z * z
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = w * w - x * x + y * y - z * z
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = w * w - x * x - y * y + z * z
    return R


def closest_quaternion_monte_carlo(A, n=1_000_000, rng=None, chunk=200_000) -> np.ndarray:
    """Best of n random unit quaternions by Frobenius alignment tr(A^T R(q))."""
    rng = np.random.default_rng(0) if rng is None else rng
    A = np.asarray(A, dtype=float)
    best, best_score = None, -np.inf
    done = 0
    while done < n:
        m = min(chunk, n - done)
        qs = random_unit_quaternions(m, rng)
        scores = np.einsum("ij,nij->n", A, quaternion_matrices(qs))
        k = int(np.argmax(scores))
        if scores[k] > best_score:
            best_score, best = scores[k], qs[k]
        done += m
    return best if best[0] >= 0 else -best
