"""Swing-foot set-point curves: C2 piecewise cubics.

Each axis is a cubic spline on a few knots whose coefficients are found
from boundary conditions (position, velocity, acceleration) plus C2
continuity at the interior knots, so the acceleration feed-forward never
jumps, not even when the curve is re-fitted mid-swing.
"""

from __future__ import annotations

import numpy as np

MIN_HORIZON = 0.02


class PiecewiseCubic:
    """Cubic segments on ``knots`` with C2 joins.

    ``conditions`` are (time, order, value) triples with order 0, 1 or 2;
    their number must equal ``len(knots) + 2``, the spline's free
    parameters after the continuity constraints.
    """

    def __init__(self, knots, conditions):
        knots = np.asarray(knots, dtype=float)
        m = len(knots) - 1
        if m < 1 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        rows, rhs = [], []
        for t, order, value in conditions:
            rows.append(self._row(knots, t, order))
            rhs.append(value)
        for j in range(1, m):
            for order in range(3):
                r = np.zeros(4 * m)
                r[4 * (j - 1):4 * j] = self._basis(knots[j] - knots[j - 1], order)
                r[4 * j:4 * j + 4] -= self._basis(0.0, order)
                rows.append(r)
                rhs.append(0.0)
        M = np.array(rows)
        if M.shape != (4 * m, 4 * m):
            raise ValueError(f"{len(conditions)} conditions for a {m}-segment spline (need {m + 3})")
        self.knots = knots
        self.coeffs = np.linalg.solve(M, np.array(rhs, dtype=float)).reshape(m, 4)

    @staticmethod
    def _basis(s, order):
        if order == 0:
            return np.array([1.0, s, s * s, s**3])
        if order == 1:
            return np.array([0.0, 1.0, 2 * s, 3 * s * s])
        return np.array([0.0, 0.0, 2.0, 6 * s])

    def _segment(self, t):
        j = int(np.searchsorted(self.knots, t, side="right")) - 1
        return min(max(j, 0), len(self.knots) - 2)

    def _row(self, knots, t, order):
        self.knots = knots
        j = self._segment(t)
        r = np.zeros(4 * (len(knots) - 1))
        r[4 * j:4 * j + 4] = self._basis(t - knots[j], order)
        return r

    @property
    def t0(self) -> float:
        return float(self.knots[0])

    @property
    def t1(self) -> float:
        return float(self.knots[-1])

    def __call__(self, t) -> tuple:
        """(p, v, a); constant before the start, constant velocity after the end."""
        if t < self.t0:
            return self._eval(self.t0)[0], 0.0, 0.0
        if t > self.t1:
            p, v, _ = self._eval(self.t1)
            return p + v * (t - self.t1), v, 0.0
        return self._eval(t)

    def _eval(self, t):
        j = self._segment(t)
        s = t - self.knots[j]
        c = self.coeffs[j]
        return (float(c @ self._basis(s, 0)), float(c @ self._basis(s, 1)), float(c @ self._basis(s, 2)))


def _rest_to_rest(t0, t1, p0, v0, a0, p1, v1):
    """Three segments from (p0, v0, a0) to (p1, v1, 0)."""
    knots = np.linspace(t0, t1, 4)
    return PiecewiseCubic(knots, [(t0, 0, p0), (t0, 1, v0), (t0, 2, a0), (t1, 0, p1), (t1, 1, v1), (t1, 2, 0.0)])


def _through_apex(t0, t_apex, t1, p0, v0, a0, top, p1, v1):
    """Five segments: rise to ``top`` at ``t_apex`` with zero velocity, then descend to ``p1``."""
    knots = [t0, 0.5 * (t0 + t_apex), t_apex, t_apex + (t1 - t_apex) / 3, t_apex + 2 * (t1 - t_apex) / 3, t1]
    conds = [(t0, 0, p0), (t0, 1, v0), (t0, 2, a0), (t_apex, 0, top), (t_apex, 1, 0.0),
             (t1, 0, p1), (t1, 1, v1), (t1, 2, 0.0)]
    return PiecewiseCubic(knots, conds)


class SwingTrajectory:
    """Lift to an apex height, then descend onto the target.

    Horizontal axes move from start to target over the whole swing; the
    vertical axis reaches ``apex`` above the higher end point at the end of
    the lifting time and arrives with ``touchdown_speed`` downward. Every
    axis starts and ends with zero acceleration.
    """

    def __init__(self, start, target, t0, lifting, landing, apex=0.05, touchdown_speed=0.05, rows=(0, 1, 2)):
        self.rows = tuple(rows)
        self.start = np.asarray(start, dtype=float)
        self.target = np.asarray(target, dtype=float)
        self.t0, self.t_apex, self.t1 = t0, t0 + lifting, t0 + lifting + landing
        self.apex = apex
        self.top = None
        self.touchdown_speed = touchdown_speed
        self.axes = {}
        for k, r in enumerate(self.rows):
            if r == 2:
                self.top = max(self.start[k], self.target[k]) + apex
                self.axes[k] = _through_apex(self.t0, self.t_apex, self.t1, self.start[k], 0.0, 0.0, self.top,
                                             self.target[k], -touchdown_speed)
            else:
                self.axes[k] = _rest_to_rest(self.t0, self.t1, self.start[k], 0.0, 0.0, self.target[k], 0.0)

    def __call__(self, t) -> tuple:
        out = np.array([self.axes[k](t) for k in range(len(self.rows))])
        return out[:, 0], out[:, 1], out[:, 2]

    def _refit(self, t, t_end, target):
        t_end = max(t_end, t + MIN_HORIZON)
        for k, r in enumerate(self.rows):
            p, v, a = self.axes[k](t)
            if r == 2:
                if t < self.t_apex - MIN_HORIZON and self.t_apex < t_end - MIN_HORIZON:
                    self.top = max(self.top, target[k] + self.apex)
                    self.axes[k] = _through_apex(t, self.t_apex, t_end, p, v, a, self.top, target[k],
                                                 -self.touchdown_speed)
                else:
                    self.axes[k] = _rest_to_rest(t, t_end, p, v, a, target[k], -self.touchdown_speed)
            else:
                self.axes[k] = _rest_to_rest(t, t_end, p, v, a, target[k], 0.0)
        self.t1 = t_end
        self.target = np.asarray(target, dtype=float)

    def retarget(self, t, target):
        """Refit the rest of the curve to a new target; position, velocity and acceleration stay continuous."""
        self._refit(t, self.t1, np.asarray(target, dtype=float))

    def reschedule(self, t, t_end, target):
        """Refit so the curve reaches ``target`` at ``t_end`` instead of the nominal end."""
        self.t_apex = min(self.t_apex, 0.5 * (t + t_end)) if t < self.t_apex else self.t_apex
        self._refit(t, t_end, np.asarray(target, dtype=float))


def swing_trajectory(start, target, phase_clock, lifting=0.23, landing=0.26, apex=0.05, rows=(0, 1, 2)):
    """(pos, vel, acc) at ``phase_clock`` seconds into the swing."""
    return SwingTrajectory(start, target, 0.0, lifting, landing, apex, rows=rows)(phase_clock)
