"""Torso orientation from motion-capture LEDs and IMU rates."""

from pointfoot.estimator.affine import (
    N_LEDS,
    AffineParams,
    LedPattern,
    Weights,
    build_regressor,
    knockout,
    solve_regularized,
    solve_unregularized,
)
from pointfoot.estimator.fusion import (
    FusionBuffer,
    FusionDiagnostics,
    MocapSample,
    SensorTrace,
    fuse_tick,
    run_fusion,
    synthetic_trace,
    write_estimate_log,
)
from pointfoot.estimator.quaternion import closest_quaternion, integrate_imu

__all__ = [name for name in dir() if not name.startswith("_")]
