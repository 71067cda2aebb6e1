"""Compiled Dormand-Prince 8(5,3) integrator for the augmented reduced flow.

scipy's ``solve_ivp`` pays a Python round trip per stage, which dominates
when the shooting solver needs thousands of trajectories.  This loop reuses
scipy's DOP853 coefficient tables and its error norm, and runs entirely
under numba.  Events are located by re-stepping from the last accepted
point with a safeguarded Newton iteration on the step length, so the event
is resolved to the accuracy of a single 8th-order step.

State: y = (psi, phi, lam, t_phys, log_rho).
"""

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

from . import _kernels as K

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

NY = 5

# termination codes
DONE_TAU = 0
DONE_TARGET = 1
DONE_BOUNDARY = 2
FAIL_STEP = 3
FAIL_QUAD = 4
FAIL_MAXSTEPS = 5

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@njit(cache=True)
def _rhs(y, mode, qtol, n0_cbrt, sign_a, pin_phi):
    out, st = K.flow_rhs(y, mode, qtol, n0_cbrt, sign_a)
    if pin_phi:
        out[1] = 0.0
    return out, st


@njit(cache=True)
def _step(y, f0, h, mode, qtol, n0_cbrt, sign_a, pin_phi, rtol, atol):
    """One DOP853 step; returns (y_new, f_new, err_norm, quad_status)."""
    Kst = np.zeros((_NS + 1, NY))
    Kst[0] = f0
    st = 0
    for s in range(1, _NS):
        dy = np.zeros(NY)
        for j in range(s):
            a = _A[s, j]
            if a != 0.0:
                dy += a * Kst[j]
        fs, q = _rhs(y + h * dy, mode, qtol, n0_cbrt, sign_a, pin_phi)
        st = max(st, q)
        Kst[s] = fs
    acc = np.zeros(NY)
    for j in range(_NS):
        acc += _B[j] * Kst[j]
    y_new = y + h * acc
    f_new, q = _rhs(y_new, mode, qtol, n0_cbrt, sign_a, pin_phi)
    st = max(st, q)
    Kst[_NS] = f_new
    e5 = 0.0
    e3 = 0.0
    for i in range(NY):
        sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
        r5 = 0.0
        r3 = 0.0
        for j in range(_NS + 1):
            r5 += Kst[j, i] * _E5[j]
            r3 += Kst[j, i] * _E3[j]
        e5 += (r5 / sc) ** 2
        e3 += (r3 / sc) ** 2
    if e5 == 0.0 and e3 == 0.0:
        err = 0.0
    else:
        err = abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * NY)
    return y_new, f_new, err, st


@njit(cache=True)
def _locate(y, f0, h, idx, target, mode, qtol, n0_cbrt, sign_a, pin_phi, rtol, atol):
    """Find 0 < theta <= h (same sign as h) with y(theta)[idx] = target.

    Assumes y[idx] - target and y(h)[idx] - target have opposite signs (or
    the latter is zero).  Newton on theta with bisection safeguard.
    """
    lo = 0.0
    hi = h
    glo = y[idx] - target
    theta = h
    ybest = y.copy()
    # secant start
    yh, fh, _, _ = _step(y, f0, h, mode, qtol, n0_cbrt, sign_a, pin_phi, rtol, atol)
    ghi = yh[idx] - target
    if ghi == 0.0:
        return h, yh
    theta = h * glo / (glo - ghi)
    for _ in range(80):
        if not (min(lo, hi) < theta < max(lo, hi)):
            theta = 0.5 * (lo + hi)
        yt, ft, _, _ = _step(y, f0, theta, mode, qtol, n0_cbrt, sign_a, pin_phi, rtol, atol)
        g = yt[idx] - target
        ybest = yt
        if abs(g) <= 1e-15 * max(1.0, abs(target)) or abs(hi - lo) < 1e-15:
            return theta, yt
        if (g > 0.0) == (glo > 0.0):
            lo = theta
            glo = g
        else:
            hi = theta
        d = ft[idx]
        if d != 0.0:
            theta = theta - g / d
        else:
            theta = 0.5 * (lo + hi)
    return theta, ybest


@njit(cache=True)
def integrate_core(y0, tau_end, mode, qtol, n0_cbrt, sign_a, pin_phi,
                   rtol, atol, max_step, fixed_step,
                   t_idx, t_val, t_dir, phi_limit, record, max_steps):
    """Integrate from tau = 0 to tau_end (either sign).

    Target event: component ``t_idx`` (negative disables) crossing ``t_val``;
    ``t_dir`` = +1/-1 restricts to increasing/decreasing crossings measured
    along the direction of integration, 0 accepts both.  Boundary event:
    |phi| reaching ``phi_limit``.

    Returns (taus, ys, n_rec, code, tau_final, y_final).
    """
    direction = 1.0 if tau_end >= 0.0 else -1.0
    cap = 1024 if record else 1
    taus = np.empty(cap)
    ys = np.empty((cap, NY))
    y = y0.copy()
    t = 0.0
    n_rec = 0
    if record:
        taus[0] = t
        ys[0] = y
        n_rec = 1
    f, st = _rhs(y, mode, qtol, n0_cbrt, sign_a, pin_phi)
    if st != 0:
        return taus, ys, n_rec, FAIL_QUAD, t, y
    if tau_end == 0.0:
        return taus, ys, n_rec, DONE_TAU, t, y
    h_abs = min(max_step, 1e-2)
    if fixed_step:
        h_abs = max_step
    code = DONE_TAU
    steps = 0
    while True:
        if steps >= max_steps:
            code = FAIL_MAXSTEPS
            break
        remaining = abs(tau_end - t)
        last = False
        if h_abs >= remaining:
            h_abs = remaining
            last = True
        h = direction * h_abs
        y_new, f_new, err, st = _step(y, f, h, mode, qtol, n0_cbrt, sign_a, pin_phi,
                                      rtol, atol)
        if st != 0 or not math.isfinite(err):
            # stages may leave the domain next to |phi| = pi/2: retry shorter
            h_abs *= 0.5
            if h_abs < 1e-12 * max(1.0, abs(t)):
                code = FAIL_QUAD
                break
            continue
        if not fixed_step and err > 1.0:
            fac = max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / 8.0))
            h_abs *= fac
            if h_abs < 1e-14 * max(1.0, abs(t)):
                code = FAIL_STEP
                break
            continue
        steps += 1
        # event checks on the accepted step
        hit = 0
        if phi_limit > 0.0 and abs(y_new[1]) >= phi_limit:
            hit = 2
        elif t_idx >= 0:
            g0 = y[t_idx] - t_val
            g1 = y_new[t_idx] - t_val
            if t_dir == 0:
                if (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1):
                    hit = 1
            elif t_dir > 0:
                if g0 < 0.0 <= g1:
                    hit = 1
            else:
                if g0 > 0.0 >= g1:
                    hit = 1
        if hit == 2:
            lim = phi_limit if y_new[1] > 0.0 else -phi_limit
            theta, y_new = _locate(y, f, h, 1, lim, mode, qtol, n0_cbrt, sign_a,
                                   pin_phi, rtol, atol)
            h = theta
            code = DONE_BOUNDARY
        elif hit == 1:
            theta, y_new = _locate(y, f, h, t_idx, t_val, mode, qtol, n0_cbrt,
                                   sign_a, pin_phi, rtol, atol)
            h = theta
            code = DONE_TARGET
        t = t + h
        y = y_new
        if record:
            if n_rec >= cap:
                cap *= 2
                nt = np.empty(cap)
                ny = np.empty((cap, NY))
                nt[:n_rec] = taus[:n_rec]
                ny[:n_rec] = ys[:n_rec]
                taus = nt
                ys = ny
            taus[n_rec] = t
            ys[n_rec] = y
            n_rec += 1
        if hit != 0:
            break
        if last:
            t = tau_end
            code = DONE_TAU
            break
        f = f_new
        if not fixed_step:
            if err == 0.0:
                fac = _MAX_FACTOR
            else:
                fac = min(_MAX_FACTOR, _SAFETY * err ** (-1.0 / 8.0))
            h_abs = min(max_step, h_abs * fac)
    return taus, ys, n_rec, code, t, y
