"""Unit quaternions in (w, x, y, z) order, Hamilton convention."""

import numpy as np

from pointfoot.errors import EstimatorError


def normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def canonical(q) -> np.ndarray:
    """Sign convention w >= 0."""
    q = np.asarray(q, dtype=float)
    return -q if q[0] < 0 else q


def multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def conjugate(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])


def from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis / n])


def angle_between(a, b) -> float:
    """Rotation angle (rad) taking a to b."""
    d = abs(float(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return 2.0 * np.arccos(min(d, 1.0))


def closest_quaternion(A) -> np.ndarray:
    """Unit quaternion whose rotation best aligns with an arbitrary 3x3 matrix.

    Maximises tr(A^T R(q)) = q^T K q, so the answer is the eigenvector of the
    symmetric 4x4 K with the largest eigenvalue.
    """
    A = np.asarray(A, dtype=float)
    a = A
    K = np.array([
        [a[0, 0] + a[1, 1] + a[2, 2], a[2, 1] - a[1, 2], a[0, 2] - a[2, 0], a[1, 0] - a[0, 1]],
        [a[2, 1] - a[1, 2], a[0, 0] - a[1, 1] - a[2, 2], a[0, 1] + a[1, 0], a[0, 2] + a[2, 0]],
        [a[0, 2] - a[2, 0], a[0, 1] + a[1, 0], -a[0, 0] + a[1, 1] - a[2, 2], a[1, 2] + a[2, 1]],
        [a[1, 0] - a[0, 1], a[0, 2] + a[2, 0], a[1, 2] + a[2, 1], -a[0, 0] - a[1, 1] + a[2, 2]],
    ])
    _, vecs = np.linalg.eigh(K)
    return canonical(normalize(vecs[:, -1]))


def integrate_imu(q_prev, omega, dt) -> np.ndarray:
    """Advance an orientation by a body-frame angular rate held for dt.

    Uses the exact exponential of the constant-rate rotation, then re-unitises.
    """
    if not dt > 0:
        raise EstimatorError("dt must be positive")
    omega = np.asarray(omega, dtype=float)
    rate = np.linalg.norm(omega)
    if rate == 0.0:
        return normalize(q_prev)
    half = 0.5 * rate * dt
    dq = np.concatenate([[np.cos(half)], np.sin(half) * omega / rate])
    return normalize(multiply(q_prev, dq))
