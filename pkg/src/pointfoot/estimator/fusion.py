"""Latency-compensated fusion of motion-capture LEDs and IMU rates.

Every controller tick the IMU rate advances the orientation. A motion-capture
frame measured ``latency_ticks`` ago corrects the estimate stored for that
past tick, and the stored rates are re-integrated forward to now.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pointfoot.errors import EstimatorError
from pointfoot.estimator import quaternion as quat
from pointfoot.estimator.affine import (
    N_LEDS,
    AffineParams,
    LedPattern,
    Weights,
    build_regressor,
    solve_regularized,
)


@dataclass
class MocapSample:
    """LED positions (7 x 3, NaN rows for dropouts) measured at controller tick ``tick``."""

    tick: int
    leds: np.ndarray

    @property
    def visible(self) -> np.ndarray:
        return ~np.isnan(self.leds).any(axis=1)


@dataclass
class FusionDiagnostics:
    updates: int = 0
    dropped_stale: int = 0
    leds_seen: int = 0


@dataclass
class FusionBuffer:
    pattern: LedPattern
    q0: np.ndarray
    dt: float = 1e-3
    latency_ticks: int = 15
    depth: int = 64
    weights: Weights | None = None
    compensate: bool = True
    x0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    diagnostics: FusionDiagnostics = field(default_factory=FusionDiagnostics)

    def __post_init__(self):
        if self.depth < self.latency_ticks + 1:
            raise EstimatorError(f"buffer depth {self.depth} must exceed latency {self.latency_ticks}")
        if self.weights is None:
            self.weights = Weights.half_life(self.pattern)
        if not self.weights.lam1 < self.weights.lam2:
            raise EstimatorError("lambda_1 must be much smaller than lambda_2")
        self.regressor = build_regressor(self.pattern)
        self.now = 0
        self._q = np.zeros((self.depth, 4))
        self._w = np.zeros((self.depth, 3))
        self._q[0] = quat.canonical(quat.normalize(self.q0))
        self.x = np.asarray(self.x0, dtype=float).copy()

    @property
    def estimate(self) -> np.ndarray:
        return self._q[self.now % self.depth].copy()

    def at(self, tick) -> np.ndarray:
        if not self.now - self.depth < tick <= self.now:
            raise EstimatorError(f"tick {tick} is outside the buffer")
        return self._q[tick % self.depth].copy()


def fuse_tick(buf: FusionBuffer, omega, mocap: MocapSample | None = None) -> np.ndarray:
    """Advance one controller tick; returns the orientation estimate for now."""
    d = buf.depth
    prev = buf._q[buf.now % d]
    buf.now += 1
    buf._w[buf.now % d] = omega
    buf._q[buf.now % d] = quat.integrate_imu(prev, omega, buf.dt)
    if mocap is None:
        return buf.estimate

    k = mocap.tick if buf.compensate else buf.now
    if buf.now - k >= d - 1 or k > buf.now:
        buf.diagnostics.dropped_stale += 1
        return buf.estimate
    visible = mocap.visible
    prior = AffineParams(buf.x, quat.to_matrix(buf._q[k % d]))
    post = solve_regularized(buf.regressor, mocap.leds, visible, prior, buf.weights)
    buf.x = post.x
    buf._q[k % d] = quat.closest_quaternion(post.A)
    for j in range(k + 1, buf.now + 1):
        buf._q[j % d] = quat.integrate_imu(buf._q[(j - 1) % d], buf._w[j % d], buf.dt)
    buf.diagnostics.updates += 1
    buf.diagnostics.leds_seen += int(visible.sum())
    return buf.estimate


# --- synthetic traces -------------------------------------------------------------------------

@dataclass
class SensorTrace:
    t: np.ndarray
    omega: np.ndarray
    mocap: dict
    truth: np.ndarray

    def to_csv(self, path):
        """Columns t, wx, wy, wz, mocap_tick, led{i}_{x,y,z}; a mocap frame sits on its arrival row."""
        header = ["t", "wx", "wy", "wz", "mocap_tick"] + [f"led{i}_{a}" for i in range(N_LEDS) for a in "xyz"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n, t in enumerate(self.t):
                m = self.mocap.get(n)
                leds = m.leds.ravel() if m is not None else np.full(3 * N_LEDS, np.nan)
                tick = m.tick if m is not None else ""
                w.writerow([repr(float(t)), *map(repr, map(float, self.omega[n])), tick, *map(repr, map(float, leds))])

    @classmethod
    def from_csv(cls, path) -> "SensorTrace":
        t, omega, mocap = [], [], {}
        with open(path, newline="") as fh:
            for n, row in enumerate(csv.DictReader(fh)):
                t.append(float(row["t"]))
                omega.append([float(row[k]) for k in ("wx", "wy", "wz")])
                if row["mocap_tick"]:
                    leds = np.array([float(row[f"led{i}_{a}"]) for i in range(N_LEDS) for a in "xyz"]).reshape(N_LEDS, 3)
                    mocap[n] = MocapSample(int(row["mocap_tick"]), leds)
        return cls(np.array(t), np.array(omega), mocap, np.full((len(t), 4), np.nan))


def synthetic_trace(duration, omega_true, pattern: LedPattern, q0=(1, 0, 0, 0), dt=1e-3, mocap_rate=480.0,
                    latency_ticks=15, p_visible=1.0, gyro_bias=(0, 0, 0), gyro_noise=0.0, led_noise=0.0,
                    blackout=None, position=(0, 0, 1.0), seed=0) -> SensorTrace:
    """Truth plus sensor streams for a body turning at ``omega_true(t)`` (body frame).

    Frames are measured at the tick nearest each mocap period and delivered
    ``latency_ticks`` later. ``blackout=(t0, t1)`` drops frames measured inside it.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration / dt))
    t = np.arange(n + 1) * dt
    truth = np.empty((n + 1, 4))
    truth[0] = quat.normalize(q0)
    omega = np.empty((n + 1, 3))
    omega[0] = 0.0
    for k in range(1, n + 1):
        w = np.asarray(omega_true(t[k - 1]), dtype=float)
        truth[k] = quat.integrate_imu(truth[k - 1], w, dt)
        omega[k] = w + np.asarray(gyro_bias) + gyro_noise * rng.standard_normal(3)
    mocap = {}
    frames = int(duration * mocap_rate)
    for f in range(frames + 1):
        k = int(round(f / mocap_rate / dt))
        arrival = k + latency_ticks
        if arrival > n:
            break
        if blackout is not None and blackout[0] <= t[k] < blackout[1]:
            continue
        R = quat.to_matrix(truth[k])
        leds = np.asarray(position) + pattern.points @ R.T + led_noise * rng.standard_normal((N_LEDS, 3))
        leds[rng.random(N_LEDS) > p_visible] = np.nan
        mocap[arrival] = MocapSample(k, leds)
    return SensorTrace(t, omega, mocap, truth)


def run_fusion(trace: SensorTrace, buf: FusionBuffer) -> tuple:
    """Estimates for every tick and the per-tick innovation flag."""
    n = len(trace.t)
    est = np.empty((n, 4))
    flags = np.zeros(n, dtype=bool)
    est[0] = buf.estimate
    for k in range(1, n):
        m = trace.mocap.get(k)
        before = buf.diagnostics.updates
        est[k] = fuse_tick(buf, trace.omega[k], m)
        flags[k] = buf.diagnostics.updates > before
    return est, flags


def write_estimate_log(path, t, est, flags):
    """CSV {t, qw, qx, qy, qz, innovation}."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "qw", "qx", "qy", "qz", "innovation"])
        for ti, q, f in zip(t, est, flags):
            w.writerow([repr(float(ti)), *map(repr, map(float, q)), int(f)])
