"""Compiled prismatic-inverted-pendulum integration and footstep bisection.

A height surface is a piecewise polynomial: segment i covers
[breaks[i], breaks[i+1]) and holds ascending coefficients in x.
"""

import numpy as np
from numba import njit

DONE = 0
REVERSED = 1
SPEED_LIMIT = 2
SINGULAR = 3

PLAIN = 0
STOP_ON_REVERSAL = 1
STOP_ON_SPEED = 2


@njit(cache=True)
def surface_eval(breaks, coeffs, x):
    m = coeffs.shape[0]
    i = 0
    while i < m - 1 and x >= breaks[i + 1]:
        i += 1
    c = coeffs[i]
    h = 0.0
    dh = 0.0
    ddh = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        ddh = ddh * x + 2.0 * dh
        dh = dh * x + h
        h = h * x + c[k]
    return h, dh, ddh


@njit(cache=True)
def accel(x, v, xp, breaks, coeffs, g, eps):
    """(xdd, ok) for the pendulum pivoting on xp."""
    h, dh, ddh = surface_eval(breaks, coeffs, x)
    den = h - (x - xp) * dh
    if abs(den) < eps or h <= 0.0:
        return 0.0, False
    return (g + ddh * v * v) / den * (x - xp), True


@njit(cache=True)
def rk4_step(x, v, xp, h, breaks, coeffs, g, eps):
    a1, ok1 = accel(x, v, xp, breaks, coeffs, g, eps)
    x2 = x + 0.5 * h * v
    v2 = v + 0.5 * h * a1
    a2, ok2 = accel(x2, v2, xp, breaks, coeffs, g, eps)
    x3 = x + 0.5 * h * v2
    v3 = v + 0.5 * h * a2
    a3, ok3 = accel(x3, v3, xp, breaks, coeffs, g, eps)
    x4 = x + h * v3
    v4 = v + h * a3
    a4, ok4 = accel(x4, v4, xp, breaks, coeffs, g, eps)
    ok = ok1 and ok2 and ok3 and ok4
    return x + h / 6.0 * (v + 2 * v2 + 2 * v3 + v4), v + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4), ok


@njit(cache=True)
def _event_value(v, v_start, mode, level):
    if mode == STOP_ON_REVERSAL:
        return v * np.sign(v_start)
    return level - abs(v)


@njit(cache=True)
def integrate(x0, v0, xp, T, dt, breaks, coeffs, g, eps, mode, level, record):
    """Fixed-step RK4 over [0, T] with a final partial step landing on T exactly.

    ``mode`` may stop early when the velocity reverses or when |v| reaches
    ``level``; the stopping instant is refined by bisecting the last step.
    Returns (t, x, v, status, ts, xs, vs) with the trajectory when ``record``.
    """
    n_full = int(np.floor(T / dt + 1e-9))
    rem = T - n_full * dt
    n_steps = n_full + (1 if rem > 1e-12 else 0)
    size = n_steps + 1 if record else 1
    ts = np.empty(size)
    xs = np.empty(size)
    vs = np.empty(size)
    ts[0] = 0.0
    xs[0] = x0
    vs[0] = v0
    t = 0.0
    x = x0
    v = v0
    for k in range(n_steps):
        h = dt if k < n_full else rem
        xn, vn, ok = rk4_step(x, v, xp, h, breaks, coeffs, g, eps)
        if not ok:
            if record:
                return t, x, v, SINGULAR, ts[:k + 1], xs[:k + 1], vs[:k + 1]
            return t, x, v, SINGULAR, ts, xs, vs
        if mode != PLAIN and _event_value(vn, v0, mode, level) <= 0.0 and _event_value(v, v0, mode, level) > 0.0:
            lo = 0.0
            hi = h
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                xm, vm, okm = rk4_step(x, v, xp, mid, breaks, coeffs, g, eps)
                if _event_value(vm, v0, mode, level) > 0.0:
                    lo = mid
                else:
                    hi = mid
            xn, vn, ok = rk4_step(x, v, xp, hi, breaks, coeffs, g, eps)
            t += hi
            status = REVERSED if mode == STOP_ON_REVERSAL else SPEED_LIMIT
            if record:
                ts[k + 1] = t
                xs[k + 1] = xn
                vs[k + 1] = vn
                return t, xn, vn, status, ts[:k + 2], xs[:k + 2], vs[:k + 2]
            return t, xn, vn, status, ts, xs, vs
        x = xn
        v = vn
        t = T if k == n_steps - 1 else t + h
        if record:
            ts[k + 1] = t
            xs[k + 1] = x
            vs[k + 1] = v
    return t, x, v, DONE, ts, xs, vs


@njit(cache=True)
def velocity_after(x0, v0, xp, T, dt, breaks, coeffs, g, eps):
    t, x, v, status, _, _, _ = integrate(x0, v0, xp, T, dt, breaks, coeffs, g, eps, PLAIN, 0.0, False)
    return v, status


@njit(cache=True)
def bisect_footstep(x0, v0, T, lo, hi, dt, breaks, coeffs, g, eps, tol):
    """Foot position in [lo, hi] making v(T) vanish.

    Returns (p, v(T) at p, saturated, status).
    """
    f_lo, s_lo = velocity_after(x0, v0, lo, T, dt, breaks, coeffs, g, eps)
    f_hi, s_hi = velocity_after(x0, v0, hi, T, dt, breaks, coeffs, g, eps)
    if s_lo == SINGULAR or s_hi == SINGULAR:
        if s_lo == SINGULAR and s_hi == SINGULAR:
            return 0.5 * (lo + hi), np.nan, True, SINGULAR
    if f_lo == 0.0:
        return lo, 0.0, False, DONE
    if f_hi == 0.0:
        return hi, 0.0, False, DONE
    if s_lo == SINGULAR or s_hi == SINGULAR or np.sign(f_lo) == np.sign(f_hi):
        if s_hi == SINGULAR or (s_lo != SINGULAR and abs(f_lo) <= abs(f_hi)):
            return lo, f_lo, True, s_lo
        return hi, f_hi, True, s_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid, s_mid = velocity_after(x0, v0, mid, T, dt, breaks, coeffs, g, eps)
        if s_mid == SINGULAR:
            return mid, np.nan, False, SINGULAR
        if f_mid == 0.0:
            return mid, 0.0, False, DONE
        if np.sign(f_mid) == np.sign(f_lo):
            lo = mid
            f_lo = f_mid
        else:
            hi = mid
    p = 0.5 * (lo + hi)
    f_p, s_p = velocity_after(x0, v0, p, T, dt, breaks, coeffs, g, eps)
    return p, f_p, False, s_p


@njit(cache=True)
def bisect_grid(x0s, v0s, Ts, reach, dt, breaks, coeffs, g, eps, tol):
    n = x0s.shape[0]
    out = np.empty(n)
    for i in range(n):
        p, _, _, _ = bisect_footstep(x0s[i], v0s[i], Ts[i], x0s[i] - reach, x0s[i] + reach,
                                     dt, breaks, coeffs, g, eps, tol)
        out[i] = p
    return out
