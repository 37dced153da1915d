"""Initial standing configurations by Newton iteration on the leg joints."""

from __future__ import annotations

import numpy as np

from pointfoot.errors import ModelError
from pointfoot.model import GeneralizedState, Kinematics, RobotModel

BENT_KNEE = (-0.4, 0.8)


def stance_state(model: RobotModel, feet: dict, com, tol=1e-12, max_iter=50) -> GeneralizedState:
    """Zero-velocity state with level torso, feet at ``feet[name]`` and COM at ``com``.

    Unknowns are the base translation and the leg joints; residuals are the
    foot positions and the COM position (task rows only). The square system
    is solved by Newton steps from a bent-knee guess.
    """
    rows = list(model.task_rows)
    base = [model.coordinate(c) for c in ("base_x", "base_y", "base_z") if c in model.coordinate_names]
    legs = list(range(model.n_base, model.n_dofs))
    cols = base + legs
    q = np.zeros(model.n_dofs)
    q[model.coordinate("base_z")] = float(np.asarray(com)[-1])
    for side in ("r", "l"):
        q[model.coordinate(f"{side}_thigh")] = BENT_KNEE[0]
        q[model.coordinate(f"{side}_shank")] = BENT_KNEE[1]
    targets = np.concatenate([np.asarray(feet[n], dtype=float)[rows] for n in feet] +
                             [np.asarray(com, dtype=float)])
    zero = np.zeros(model.n_dofs)
    for _ in range(max_iter):
        kin = Kinematics(model, GeneralizedState(q, zero))
        xs, Js = [], []
        for name in feet:
            x, J, _ = kin.named_point(name, rows)
            xs.append(x)
            Js.append(J)
        x, J, _ = kin.com(rows)
        xs.append(x)
        Js.append(J)
        r = targets - np.concatenate(xs)
        if np.abs(r).max() < tol:
            return GeneralizedState(q, zero)
        dq = np.linalg.lstsq(np.vstack(Js)[:, cols], r, rcond=None)[0]
        q[cols] += dq
    raise ModelError(f"stance solver did not converge (residual {np.abs(r).max():.3g})")


def stance_velocity(model: RobotModel, state: GeneralizedState, feet, com_velocity) -> GeneralizedState:
    """Same configuration with feet at rest, level torso rates and the given horizontal COM velocity."""
    rows = list(model.task_rows)
    n = model.n_dofs
    kin = Kinematics(model, GeneralizedState(state.q, np.zeros(n)))
    Js = [kin.named_point(name, rows)[1] for name in feet]
    Js.append(kin.com(rows)[1])
    orient = [c for c in ("base_yaw", "base_pitch", "base_roll") if c in model.coordinate_names]
    for c in orient:
        e = np.zeros((1, n))
        e[0, model.coordinate(c)] = 1.0
        Js.append(e)
    J = np.vstack(Js)
    v_com = np.zeros(len(rows))
    v_com[:len(rows) - 1] = np.resize(np.asarray(com_velocity, dtype=float), len(rows) - 1)
    rhs = np.concatenate([np.zeros(len(rows) * len(feet)), v_com, np.zeros(len(orient))])
    if J.shape[0] != n:
        raise ModelError(f"velocity system has {J.shape[0]} rows for {n} unknowns")
    return GeneralizedState(state.q.copy(), np.linalg.solve(J, rhs), state.time)
