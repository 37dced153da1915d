"""Affine fit of a motion-capture LED pattern, plain and regularized."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointfoot.errors import EstimatorError

N_LEDS = 7


@dataclass(frozen=True)
class LedPattern:
    """Body-frame LED positions, re-centred so their first moment is zero."""

    points: np.ndarray
    offset: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (N_LEDS, 3):
            raise EstimatorError(f"pattern needs {N_LEDS} points of 3 coordinates, got {pts.shape}")
        centre = pts.mean(axis=0)
        object.__setattr__(self, "points", pts - centre)
        object.__setattr__(self, "offset", centre)

    @classmethod
    def default(cls, radius=0.1) -> "LedPattern":
        """Octahedron vertices plus the centre; its second moment is isotropic."""
        r = radius
        pts = [[r, 0, 0], [-r, 0, 0], [0, r, 0], [0, -r, 0], [0, 0, r], [0, 0, -r], [0, 0, 0]]
        return cls(np.array(pts, dtype=float))

    def second_moment(self) -> np.ndarray:
        return self.points.T @ self.points


@dataclass
class AffineParams:
    x: np.ndarray
    A: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        """(x; vec(A)) with vec taken row by row, matching the regressor."""
        return np.concatenate([self.x, self.A.ravel()])

    @classmethod
    def from_theta(cls, theta) -> "AffineParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (12,):
            raise EstimatorError(f"theta must have 12 entries, got {theta.shape}")
        return cls(theta[:3].copy(), theta[3:].reshape(3, 3).copy())


@dataclass(frozen=True)
class Weights:
    lam1: float
    lam2: float

    @classmethod
    def half_life(cls, pattern: LedPattern, ratio=1e-6) -> "Weights":
        """lambda_2 that halves a prior rotation error per full-visibility update.

        With exact data the vec(A) error contracts by lam2 (S + lam2 I)^-1, S the
        pattern second moment; the mean eigenvalue of S makes this exactly 1/2
        for an isotropic pattern. lambda_1 is a negligible fraction of it.
        """
        lam2 = float(np.linalg.eigvalsh(pattern.second_moment()).mean())
        return cls(ratio * lam2, lam2)


def build_regressor(pattern: LedPattern) -> np.ndarray:
    """21 x 12 map from theta to the stacked predicted LED positions."""
    R = np.zeros((3 * N_LEDS, 12))
    for i, z in enumerate(pattern.points):
        rows = slice(3 * i, 3 * i + 3)
        R[rows, :3] = np.eye(3)
        for j in range(3):
            R[3 * i + j, 3 + 3 * j: 6 + 3 * j] = z
    return R


def _stack(observed) -> np.ndarray:
    y = np.asarray(observed, dtype=float)
    return y.reshape(-1)


def solve_unregularized(regressor, observed) -> AffineParams:
    R = np.asarray(regressor, dtype=float)
    y = _stack(observed)
    if np.isnan(y).any():
        raise EstimatorError("unregularized fit needs every LED visible")
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[-1] < 1e-12 * sv[0]:
        raise EstimatorError("LED pattern is degenerate: regressor is rank deficient")
    theta = np.linalg.solve(R.T @ R, R.T @ y)
    return AffineParams.from_theta(theta)


def knockout(visible) -> np.ndarray:
    visible = np.asarray(visible, dtype=bool)
    return np.eye(N_LEDS)[visible]


def solve_regularized(regressor, observed, visible, prior, weights: Weights) -> AffineParams:
    """Weighted least squares over visible LEDs plus 12 rows pulling theta to ``prior``."""
    R = np.asarray(regressor, dtype=float)
    y = _stack(observed)
    visible = np.asarray(visible, dtype=bool)
    prior = prior.theta if isinstance(prior, AffineParams) else np.asarray(prior, dtype=float)
    if not visible.any():
        # only the regularization rows remain, whose solution is the prior itself
        return AffineParams.from_theta(prior)
    Ko = np.kron(knockout(visible), np.eye(3))
    Rr = np.vstack([Ko @ R, np.eye(12)])
    rhs = np.concatenate([Ko @ np.nan_to_num(y), prior])
    w = np.concatenate([np.ones(Ko.shape[0]), np.full(3, weights.lam1), np.full(9, weights.lam2)])
    RtW = Rr.T * w
    theta = np.linalg.solve(RtW @ Rr, RtW @ rhs)
    return AffineParams.from_theta(theta)
