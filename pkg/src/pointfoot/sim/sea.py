"""Closed-loop behaviour of series-elastic joints under torque control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointfoot.errors import ConfigError

IDEAL = "ideal"
SEA_LAG = "sea-lag"


@dataclass
class SeaJoint:
    """First-order torque tracking with bandwidth ``beta * kp_tau`` (rad/s).

    ``dry_friction`` is a Coulomb torque opposing joint motion at the output;
    a positive ``ki_tau`` integrates the tracking error to cancel it.
    """

    kp_tau: float = 50.0
    ki_tau: float = 0.0
    mode: str = IDEAL
    stiffness: float = 1500.0
    beta: float = 3.0
    dry_friction: float = 0.0
    friction_speed: float = 0.01
    integral_limit: float = 20.0
    tau_lag: float = 0.0
    integral: float = 0.0
    tau_out: float = 0.0

    def __post_init__(self):
        if self.mode not in (IDEAL, SEA_LAG):
            raise ConfigError(f"unknown joint torque mode {self.mode!r}")
        if self.kp_tau < 0 or self.ki_tau < 0:
            raise ConfigError("torque gains must be non-negative")

    @property
    def time_constant(self) -> float:
        return np.inf if self.kp_tau == 0 else 1.0 / (self.beta * self.kp_tau)

    def set_gains(self, kp_tau, ki_tau):
        self.kp_tau, self.ki_tau = float(kp_tau), float(ki_tau)


def sea_joint_torque(joint: SeaJoint, tau_des, qdot, dt) -> float:
    """Delivered torque after one controller period."""
    if joint.mode == IDEAL:
        joint.tau_out = joint.tau_lag = float(tau_des)
        return joint.tau_out
    err = tau_des - joint.tau_out
    joint.integral = float(np.clip(joint.integral + joint.ki_tau * err * dt, -joint.integral_limit,
                                   joint.integral_limit))
    target = tau_des + joint.integral
    decay = np.exp(-dt / joint.time_constant) if np.isfinite(joint.time_constant) else 1.0
    joint.tau_lag = target + (joint.tau_lag - target) * decay
    friction = joint.dry_friction * np.tanh(qdot / joint.friction_speed)
    joint.tau_out = float(joint.tau_lag - friction)
    return joint.tau_out


class SeaBank:
    """One SeaJoint per actuated coordinate."""

    def __init__(self, n, mode=IDEAL, kp_tau=50.0, ki_tau=0.0, **kw):
        self.joints = [SeaJoint(kp_tau, ki_tau, mode, **kw) for _ in range(n)]

    @property
    def mode(self) -> str:
        return self.joints[0].mode

    def set_gains(self, kp, ki):
        kp = np.broadcast_to(np.asarray(kp, dtype=float), (len(self.joints),))
        ki = np.broadcast_to(np.asarray(ki, dtype=float), (len(self.joints),))
        for j, a, b in zip(self.joints, kp, ki):
            j.set_gains(a, b)

    def deliver(self, tau_des, qdot, dt) -> np.ndarray:
        if self.mode == IDEAL:
            return np.array(tau_des, dtype=float)
        return np.array([sea_joint_torque(j, t, v, dt) for j, t, v in zip(self.joints, tau_des, qdot)])
