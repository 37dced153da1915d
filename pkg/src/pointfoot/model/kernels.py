"""Compiled recursions over a tree of single-dof joints.

Everything here works on flat arrays in world-frame Plucker coordinates
(angular part first, velocities referred to the world origin). A body index
equals its generalized coordinate index, so nq == nv == number of bodies.
"""

import numpy as np
from numba import njit

REVOLUTE = 0
PRISMATIC = 1


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _mm(A, B):
    # small dense product without the BLAS call overhead
    n, k = A.shape
    m = B.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for r in range(k):
            a = A[i, r]
            for j in range(m):
                out[i, j] += a * B[r, j]
    return out


@njit(cache=True)
def _mv(A, x):
    n, k = A.shape
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for r in range(k):
            acc += A[i, r] * x[r]
        out[i] = acc
    return out


@njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def _axis_rotation(axis, angle):
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    x, y, z = axis[0], axis[1], axis[2]
    R = np.empty((3, 3))
    R[0, 0] = t * x * x + c
    R[0, 1] = t * x * y - s * z
    R[0, 2] = t * x * z + s * y
    R[1, 0] = t * x * y + s * z
    R[1, 1] = t * y * y + c
    R[1, 2] = t * y * z - s * x
    R[2, 0] = t * x * z - s * y
    R[2, 1] = t * y * z + s * x
    R[2, 2] = t * z * z + c
    return R


@njit(cache=True)
def _crm(v, m):
    # motion cross product v x m
    out = np.empty(6)
    w = v[:3]
    vo = v[3:]
    mw = m[:3]
    mv = m[3:]
    out[:3] = _cross(w, mw)
    out[3:] = _cross(w, mv) + _cross(vo, mw)
    return out


@njit(cache=True)
def _crf(v, f):
    # force cross product v x* f
    out = np.empty(6)
    w = v[:3]
    vo = v[3:]
    n = f[:3]
    fl = f[3:]
    out[:3] = _cross(w, n) + _cross(vo, fl)
    out[3:] = _cross(w, fl)
    return out


@njit(cache=True)
def forward_kinematics(parent, jtype, axis, E_tree, r_tree, q):
    nb = parent.shape[0]
    R = np.empty((nb, 3, 3))
    p = np.empty((nb, 3))
    S = np.empty((nb, 6))
    Rp = np.empty((3, 3))
    pp = np.empty(3)
    Rj = np.empty((3, 3))
    for i in range(nb):
        k = parent[i]
        for a in range(3):
            pp[a] = p[k, a] if k >= 0 else 0.0
            for b in range(3):
                Rp[a, b] = R[k, a, b] if k >= 0 else (1.0 if a == b else 0.0)
        for a in range(3):
            for b in range(3):
                Rj[a, b] = Rp[a, 0] * E_tree[i, 0, b] + Rp[a, 1] * E_tree[i, 1, b] + Rp[a, 2] * E_tree[i, 2, b]
        pj0 = pp[0] + Rp[0, 0] * r_tree[i, 0] + Rp[0, 1] * r_tree[i, 1] + Rp[0, 2] * r_tree[i, 2]
        pj1 = pp[1] + Rp[1, 0] * r_tree[i, 0] + Rp[1, 1] * r_tree[i, 1] + Rp[1, 2] * r_tree[i, 2]
        pj2 = pp[2] + Rp[2, 0] * r_tree[i, 0] + Rp[2, 1] * r_tree[i, 1] + Rp[2, 2] * r_tree[i, 2]
        ax = axis[i]
        aw0 = Rj[0, 0] * ax[0] + Rj[0, 1] * ax[1] + Rj[0, 2] * ax[2]
        aw1 = Rj[1, 0] * ax[0] + Rj[1, 1] * ax[1] + Rj[1, 2] * ax[2]
        aw2 = Rj[2, 0] * ax[0] + Rj[2, 1] * ax[1] + Rj[2, 2] * ax[2]
        if jtype[i] == REVOLUTE:
            Q = _axis_rotation(ax, q[i])
            for a in range(3):
                for b in range(3):
                    R[i, a, b] = Rj[a, 0] * Q[0, b] + Rj[a, 1] * Q[1, b] + Rj[a, 2] * Q[2, b]
            p[i, 0] = pj0
            p[i, 1] = pj1
            p[i, 2] = pj2
            S[i, 0] = aw0
            S[i, 1] = aw1
            S[i, 2] = aw2
            S[i, 3] = pj1 * aw2 - pj2 * aw1
            S[i, 4] = pj2 * aw0 - pj0 * aw2
            S[i, 5] = pj0 * aw1 - pj1 * aw0
        else:
            R[i] = Rj
            p[i, 0] = pj0 + aw0 * q[i]
            p[i, 1] = pj1 + aw1 * q[i]
            p[i, 2] = pj2 + aw2 * q[i]
            S[i, 0] = 0.0
            S[i, 1] = 0.0
            S[i, 2] = 0.0
            S[i, 3] = aw0
            S[i, 4] = aw1
            S[i, 5] = aw2
    return R, p, S


@njit(cache=True)
def _crm_add(v, m, out):
    # out += v x m (motion cross product)
    w0, w1, w2, u0, u1, u2 = v[0], v[1], v[2], v[3], v[4], v[5]
    m0, m1, m2, n0, n1, n2 = m[0], m[1], m[2], m[3], m[4], m[5]
    out[0] += w1 * m2 - w2 * m1
    out[1] += w2 * m0 - w0 * m2
    out[2] += w0 * m1 - w1 * m0
    out[3] += w1 * n2 - w2 * n1 + u1 * m2 - u2 * m1
    out[4] += w2 * n0 - w0 * n2 + u2 * m0 - u0 * m2
    out[5] += w0 * n1 - w1 * n0 + u0 * m1 - u1 * m0


@njit(cache=True)
def _crf_add(v, f, out):
    # out += v x* f (force cross product)
    w0, w1, w2, u0, u1, u2 = v[0], v[1], v[2], v[3], v[4], v[5]
    n0, n1, n2, l0, l1, l2 = f[0], f[1], f[2], f[3], f[4], f[5]
    out[0] += w1 * n2 - w2 * n1 + u1 * l2 - u2 * l1
    out[1] += w2 * n0 - w0 * n2 + u2 * l0 - u0 * l2
    out[2] += w0 * n1 - w1 * n0 + u0 * l1 - u1 * l0
    out[3] += w1 * l2 - w2 * l1
    out[4] += w2 * l0 - w0 * l2
    out[5] += w0 * l1 - w1 * l0


@njit(cache=True)
def velocities(parent, S, v):
    """Body spatial velocities and velocity-product accelerations (qdd = 0)."""
    nb = parent.shape[0]
    V = np.zeros((nb, 6))
    Ab = np.zeros((nb, 6))
    sv = np.empty(6)
    for i in range(nb):
        k = parent[i]
        for r in range(6):
            sv[r] = S[i, r] * v[i]
            V[i, r] = sv[r] + (V[k, r] if k >= 0 else 0.0)
            Ab[i, r] = Ab[k, r] if k >= 0 else 0.0
        if k >= 0:
            _crm_add(V[i], sv, Ab[i])
    return V, Ab


@njit(cache=True)
def spatial_inertias(mass, com, Ic, R, p):
    nb = mass.shape[0]
    I6 = np.zeros((nb, 6, 6))
    RI = np.empty((3, 3))
    for i in range(nb):
        m = mass[i]
        Ri = R[i]
        c0 = p[i, 0] + Ri[0, 0] * com[i, 0] + Ri[0, 1] * com[i, 1] + Ri[0, 2] * com[i, 2]
        c1 = p[i, 1] + Ri[1, 0] * com[i, 0] + Ri[1, 1] * com[i, 1] + Ri[1, 2] * com[i, 2]
        c2 = p[i, 2] + Ri[2, 0] * com[i, 0] + Ri[2, 1] * com[i, 1] + Ri[2, 2] * com[i, 2]
        for a in range(3):
            for b in range(3):
                RI[a, b] = Ri[a, 0] * Ic[i, 0, b] + Ri[a, 1] * Ic[i, 1, b] + Ri[a, 2] * Ic[i, 2, b]
        for a in range(3):
            for b in range(3):
                I6[i, a, b] = RI[a, 0] * Ri[b, 0] + RI[a, 1] * Ri[b, 1] + RI[a, 2] * Ri[b, 2]
        # m * cx cx^T = m (|c|^2 I - c c^T)
        cc = c0 * c0 + c1 * c1 + c2 * c2
        cv = (c0, c1, c2)
        for a in range(3):
            for b in range(3):
                I6[i, a, b] += m * ((cc if a == b else 0.0) - cv[a] * cv[b])
        # m * cx and its transpose
        I6[i, 0, 4] = -m * c2
        I6[i, 0, 5] = m * c1
        I6[i, 1, 3] = m * c2
        I6[i, 1, 5] = -m * c0
        I6[i, 2, 3] = -m * c1
        I6[i, 2, 4] = m * c0
        for a in range(3):
            for b in range(3):
                I6[i, 3 + a, b] = I6[i, b, 3 + a]
            I6[i, 3 + a, 3 + a] = m
    return I6


@njit(cache=True)
def crba(parent, S, I6):
    nb = parent.shape[0]
    Icomp = I6.copy()
    for i in range(nb - 1, -1, -1):
        if parent[i] >= 0:
            Icomp[parent[i]] += Icomp[i]
    H = np.zeros((nb, nb))
    F = np.empty(6)
    for i in range(nb):
        for a in range(6):
            acc = 0.0
            for b in range(6):
                acc += Icomp[i, a, b] * S[i, b]
            F[a] = acc
        H[i, i] = _dot(S[i], F)
        j = parent[i]
        while j >= 0:
            H[i, j] = _dot(S[j], F)
            H[j, i] = H[i, j]
            j = parent[j]
    return H


@njit(cache=True)
def rnea(parent, S, I6, V, Ab, v, qdd, grav):
    """Inverse dynamics; pass V = Ab = 0 to drop velocity products."""
    nb = parent.shape[0]
    f = np.zeros((nb, 6))
    acc = np.zeros((nb, 6))
    h = np.empty(6)
    for i in range(nb):
        k = parent[i]
        for r in range(6):
            # accelerations from qdd accumulate down the tree
            acc[i, r] = S[i, r] * qdd[i] + (acc[k, r] if k >= 0 else 0.0)
        a = acc[i].copy()
        for r in range(6):
            a[r] += Ab[i, r]
        a[5] += grav
        for r in range(6):
            s1 = 0.0
            s2 = 0.0
            for c in range(6):
                s1 += I6[i, r, c] * a[c]
                s2 += I6[i, r, c] * V[i, c]
            f[i, r] = s1
            h[r] = s2
        _crf_add(V[i], h, f[i])
    tau = np.empty(nb)
    for i in range(nb - 1, -1, -1):
        tau[i] = _dot(S[i], f[i])
        k = parent[i]
        if k >= 0:
            for r in range(6):
                f[k, r] += f[i, r]
    return tau


@njit(cache=True)
def point_kinematics(parent, R, p, S, V, Ab, body, offset):
    """World position, 3 x nb linear Jacobian and Jdot*qdot of a body point."""
    nb = parent.shape[0]
    Rb = R[body]
    x = p[body, 0] + Rb[0, 0] * offset[0] + Rb[0, 1] * offset[1] + Rb[0, 2] * offset[2]
    y = p[body, 1] + Rb[1, 0] * offset[0] + Rb[1, 1] * offset[1] + Rb[1, 2] * offset[2]
    z = p[body, 2] + Rb[2, 0] * offset[0] + Rb[2, 1] * offset[1] + Rb[2, 2] * offset[2]
    pw = np.empty(3)
    pw[0] = x
    pw[1] = y
    pw[2] = z
    J = np.zeros((3, nb))
    j = body
    while j >= 0:
        s = S[j]
        J[0, j] = s[3] + s[1] * z - s[2] * y
        J[1, j] = s[4] + s[2] * x - s[0] * z
        J[2, j] = s[5] + s[0] * y - s[1] * x
        j = parent[j]
    w0, w1, w2 = V[body, 0], V[body, 1], V[body, 2]
    vp0 = V[body, 3] + w1 * z - w2 * y
    vp1 = V[body, 4] + w2 * x - w0 * z
    vp2 = V[body, 5] + w0 * y - w1 * x
    A = Ab[body]
    acc = np.empty(3)
    acc[0] = A[3] + A[1] * z - A[2] * y + w1 * vp2 - w2 * vp1
    acc[1] = A[4] + A[2] * x - A[0] * z + w2 * vp0 - w0 * vp2
    acc[2] = A[5] + A[0] * y - A[1] * x + w0 * vp1 - w1 * vp0
    return pw, J, acc


@njit(cache=True)
def com_kinematics(parent, mass, com, R, p, S, V, Ab):
    nb = parent.shape[0]
    total = 0.0
    c = np.zeros(3)
    J = np.zeros((3, nb))
    acc = np.zeros(3)
    for i in range(nb):
        if mass[i] <= 0.0:
            continue
        pw, Ji, ai = point_kinematics(parent, R, p, S, V, Ab, i, com[i])
        c += mass[i] * pw
        J += mass[i] * Ji
        acc += mass[i] * ai
        total += mass[i]
    return c / total, J / total, acc / total


@njit(cache=True)
def constraint_terms(parent, R, p, S, V, Ab, q, c_body, c_offset, c_rows, c_lock):
    """Stack point-contact rows and coordinate locks.

    Contact k is either a body point (c_lock[k] < 0) contributing the world
    axes flagged in c_rows[k], or a locked coordinate index c_lock[k].
    """
    nb = parent.shape[0]
    m = 0
    for k in range(c_body.shape[0]):
        if c_lock[k] >= 0:
            m += 1
        else:
            for r in range(3):
                if c_rows[k, r]:
                    m += 1
    J = np.zeros((m, nb))
    drift = np.zeros(m)
    pos = np.zeros(m)
    row = 0
    for k in range(c_body.shape[0]):
        if c_lock[k] >= 0:
            J[row, c_lock[k]] = 1.0
            pos[row] = q[c_lock[k]]
            row += 1
            continue
        pw, Jp, ap = point_kinematics(parent, R, p, S, V, Ab, c_body[k], c_offset[k])
        for r in range(3):
            if c_rows[k, r]:
                J[row] = Jp[r]
                drift[row] = ap[r]
                pos[row] = pw[r]
                row += 1
    return J, drift, pos


@njit(cache=True)
def constrained_accel(H, C, tau_gen, J, rhs):
    """Solve [[H, J^T], [J, 0]] [qdd; lam] = [tau_gen - C; rhs]."""
    n = H.shape[0]
    m = J.shape[0]
    if m == 0:
        return np.linalg.solve(H, tau_gen - C), np.zeros(0)
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H
    K[:n, n:] = J.T
    K[n:, :n] = J
    b = np.empty(n + m)
    b[:n] = tau_gen - C
    b[n:] = rhs
    x = np.linalg.solve(K, b)
    return x[:n], x[n:]


@njit(cache=True)
def plant_accel(parent, jtype, axis, E_tree, r_tree, mass, com, Ic, grav, armature,
                q, v, tau_gen, c_body, c_offset, c_rows, c_lock, c_anchor,
                kp, kd):
    """Forward dynamics with stabilised hard constraints, for the simulator."""
    R, p, S = forward_kinematics(parent, jtype, axis, E_tree, r_tree, q)
    V, Ab = velocities(parent, S, v)
    I6 = spatial_inertias(mass, com, Ic, R, p)
    H = crba(parent, S, I6)
    for i in range(H.shape[0]):
        H[i, i] += armature[i]
    C = rnea(parent, S, I6, V, Ab, v, np.zeros(v.shape[0]), grav)
    J, drift, pos = constraint_terms(parent, R, p, S, V, Ab, q, c_body, c_offset, c_rows, c_lock)
    m = J.shape[0]
    rhs = np.empty(m)
    for r in range(m):
        rhs[r] = -drift[r] - kd * _dot(J[r], v) - kp * (pos[r] - c_anchor[r])
    qdd, lam = constrained_accel(H, C, tau_gen, J, rhs)
    return qdd, lam
