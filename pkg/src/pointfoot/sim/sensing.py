"""Synthetic torso sensing: IMU rates and delayed motion-capture LEDs from the plant.

The fused orientation replaces the base orientation coordinates in the
state the controller sees; positions, joint angles and all velocities stay
at their true values.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from pointfoot.estimator import FusionBuffer, LedPattern, MocapSample, fuse_tick
from pointfoot.model import GeneralizedState, Kinematics, RobotModel

ORIENTATION = ("base_yaw", "base_pitch", "base_roll")


def _wxyz(R) -> np.ndarray:
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    return np.array([w, x, y, z])


def _matrix(q) -> np.ndarray:
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


class TorsoSensing:
    """One fusion buffer fed every controller tick.

    A mocap frame is taken on the first tick of each ``1 / mocap_rate``
    period and handed to the fusion ``latency_ticks`` ticks later.
    """

    def __init__(self, model: RobotModel, state: GeneralizedState, dt, rng: np.random.Generator,
                 latency_ticks=15, mocap_rate=480.0, gyro_noise=0.0, led_noise=0.0, compensate=True,
                 body="torso"):
        self.model = model
        self.body = body
        self.dt = dt
        self.rng = rng
        self.latency = int(latency_ticks)
        self.rate = float(mocap_rate)
        self.gyro_noise = gyro_noise
        self.led_noise = led_noise
        self.pattern = LedPattern.default()
        R, p = Kinematics(model, state).body_pose(body)
        self.R_prev = R
        self.buf = FusionBuffer(self.pattern, _wxyz(R), dt=dt, latency_ticks=self.latency, compensate=compensate,
                                x0=p + R @ self.pattern.offset)
        self.pending = {}
        self.tick = 0
        self.coords = [model.coordinate(c) for c in ORIENTATION if c in model.coordinate_names]
        self.names = [c for c in ORIENTATION if c in model.coordinate_names]

    def _leds(self, R, p):
        leds = p + R @ self.pattern.offset + self.pattern.points @ R.T
        return leds + self.led_noise * self.rng.standard_normal(leds.shape)

    def update(self, state: GeneralizedState) -> GeneralizedState:
        """Advance one tick from the true plant state; returns the controller's view of it."""
        self.tick += 1
        R, p = Kinematics(self.model, state).body_pose(self.body)
        omega = Rotation.from_matrix(self.R_prev.T @ R).as_rotvec() / self.dt
        omega = omega + self.gyro_noise * self.rng.standard_normal(3)
        self.R_prev = R
        if int(self.tick * self.dt * self.rate) > int((self.tick - 1) * self.dt * self.rate):
            self.pending[self.tick + self.latency] = MocapSample(self.tick, self._leds(R, p))
        est = fuse_tick(self.buf, omega, self.pending.pop(self.tick, None))
        angles = dict(zip(ORIENTATION, Rotation.from_matrix(_matrix(est)).as_euler("ZYX")))
        q = state.q.copy()
        for i, name in zip(self.coords, self.names):
            q[i] = angles[name]
        return GeneralizedState(q, state.qdot.copy(), state.time)

    def error(self, state: GeneralizedState) -> float:
        """Angle between the estimate and the true torso orientation (rad)."""
        R, _ = Kinematics(self.model, state).body_pose(self.body)
        return float(Rotation.from_matrix(R.T @ _matrix(self.buf.estimate)).magnitude())
