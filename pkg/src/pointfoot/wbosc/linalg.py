"""Small linear-algebra helpers shared by the controller."""

import numpy as np

SINGULAR_CUTOFF = 1e-6
DAMPING = 1e-8


def damped_pinv(M, cutoff=SINGULAR_CUTOFF, damping=DAMPING) -> np.ndarray:
    """SVD pseudo-inverse; singular values below ``cutoff * s_max`` are damped.

    Kept singular values invert exactly, the small ones use s / (s^2 + damping)
    so near-singular stances (straight knee) degrade smoothly.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    Uu, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros(M.shape[::-1])
    small = s < cutoff * s[0]
    inv = np.where(small, s / (s * s + damping), 1.0 / np.where(small, 1.0, s))
    # damped small values are zeroed when they are pure round-off
    inv[s < 1e-13 * s[0]] = 0.0
    return (Vt.T * inv) @ Uu.T


def condition_number(M) -> float:
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else np.inf
