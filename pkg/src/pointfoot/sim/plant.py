"""Compiled plant integration with contact bookkeeping.

The plant advances several substeps under a constant generalized force and
stops early on the first contact event so the caller can change the active
contact set and resume.
"""

import numpy as np
from numba import njit

from pointfoot.model.kernels import forward_kinematics, plant_accel, point_kinematics, velocities

OK = 0
UNILATERAL = 1
FRICTION = 2
TOUCHDOWN = 3
DIVERGED = 4

RK4 = 0
EULER = 1


@njit(cache=True)
def _plane(normals, offsets, pw):
    best = -np.inf
    k_best = 0
    for k in range(normals.shape[0]):
        h = (offsets[k] - normals[k, 0] * pw[0] - normals[k, 1] * pw[1]) / normals[k, 2]
        if h > best:
            best = h
            k_best = k
    return k_best


@njit(cache=True)
def contact_check(lam, c_body, c_rows, c_plane_normal, mu, tol):
    """First point contact whose force leaves the friction cone.

    ``lam`` is the force the robot applies to the ground, so the ground
    pushes back with -lam. Returns (code, contact index).
    """
    row = 0
    for k in range(c_body.shape[0]):
        if c_body[k] < 0:
            row += 1
            continue
        f = np.zeros(3)
        for r in range(3):
            if c_rows[k, r]:
                f[r] = -lam[row]
                row += 1
        n = c_plane_normal[k]
        fn = f @ n
        if fn < -tol:
            return UNILATERAL, k
        ft = f - fn * n
        if np.sqrt(ft @ ft) > mu * fn + tol:
            return FRICTION, k
    return OK, -1


@njit(cache=True)
def advance(parent, jtype, axis, E_tree, r_tree, mass, com, Ic, grav, armature,
            q, v, tau_gen, n_sub, dt, method,
            c_body, c_offset, c_rows, c_lock, c_anchor, c_plane_normal, kp, kd, mu, force_tol,
            w_body, w_offset, normals, offsets, v_max):
    """Integrate up to ``n_sub`` substeps of length ``dt``.

    Returns (code, substeps done, contact or watch index, q, v, lam). The
    contact forces are checked before each substep, so every completed
    substep had admissible forces; touchdown of a watched point (clearance
    at or below zero while approaching) is checked after each substep.
    """
    q = q.copy()
    v = v.copy()
    lam = np.zeros(0)
    for s in range(n_sub):
        a1, lam = plant_accel(parent, jtype, axis, E_tree, r_tree, mass, com, Ic, grav, armature,
                              q, v, tau_gen, c_body, c_offset, c_rows, c_lock, c_anchor, kp, kd)
        code, k = contact_check(lam, c_body, c_rows, c_plane_normal, mu, force_tol)
        if code != OK:
            return code, s, k, q, v, lam
        if method == EULER:
            v = v + dt * a1
            q = q + dt * v
        else:
            q2 = q + 0.5 * dt * v
            v2 = v + 0.5 * dt * a1
            a2, _ = plant_accel(parent, jtype, axis, E_tree, r_tree, mass, com, Ic, grav, armature,
                                q2, v2, tau_gen, c_body, c_offset, c_rows, c_lock, c_anchor, kp, kd)
            q3 = q + 0.5 * dt * v2
            v3 = v + 0.5 * dt * a2
            a3, _ = plant_accel(parent, jtype, axis, E_tree, r_tree, mass, com, Ic, grav, armature,
                                q3, v3, tau_gen, c_body, c_offset, c_rows, c_lock, c_anchor, kp, kd)
            q4 = q + dt * v3
            v4 = v + dt * a3
            a4, _ = plant_accel(parent, jtype, axis, E_tree, r_tree, mass, com, Ic, grav, armature,
                                q4, v4, tau_gen, c_body, c_offset, c_rows, c_lock, c_anchor, kp, kd)
            q = q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
            v = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        speed = np.sqrt(v @ v)
        if not speed <= v_max:
            return DIVERGED, s + 1, -1, q, v, lam
        if w_body.shape[0] > 0:
            R, p, S = forward_kinematics(parent, jtype, axis, E_tree, r_tree, q)
            V, Ab = velocities(parent, S, v)
            for w in range(w_body.shape[0]):
                pw, J, _ = point_kinematics(parent, R, p, S, V, Ab, w_body[w], w_offset[w])
                k = _plane(normals, offsets, pw)
                n = normals[k]
                if pw @ n - offsets[k] <= 0.0 and (J @ v) @ n < 0.0:
                    return TOUCHDOWN, s + 1, w, q, v, lam
    return OK, n_sub, -1, q, v, lam
