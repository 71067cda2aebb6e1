"""Compiled kernels: the averaged Hamiltonian densities and their partials.

Everything in here works on plain floats so that numba can compile it once
and the ODE right-hand sides stay cheap.  Mode codes: 0 = full control
(density ``L``), 1 = tangential thrust (density ``M``).
"""

import math

import numpy as np
from numba import njit

FULL = 0
TANGENTIAL = 1

# status codes returned by the adaptive integrator
OK = 0
DEPTH_EXHAUSTED = 1

MAX_DEPTH = 40
_STACK = 256

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


@njit(cache=True)
def alphas(s, cp, x):
    """Coefficients (a11, a12, a22) of the full-control quadratic form."""
    a11 = 1.0 - s * s * x * x
    a12 = -2.0 * cp * (1.0 - s * x) * x
    q = 1.0 - 3.0 * s * x + 3.0 * x * x - s * x * x * x
    a22 = (1.0 - s * x) * q
    return a11, a12, a22


@njit(cache=True)
def integrand_I(C, S, s, cp, x):
    a11, a12, a22 = alphas(s, cp, x)
    v = a11 * C * C + 2.0 * a12 * C * S + a22 * S * S
    if v < 0.0 and v > -1e-14:
        v = 0.0
    return v


@njit(cache=True)
def integrand_J(C, S, s, cp, x):
    w = math.sqrt((1.0 - s * x) / (1.0 + s * x))
    return w * ((2.0 * cp * S - s * C) * x - C)


@njit(cache=True)
def _factors(s, oms, ops, t, flip):
    """cos E, 1 - s cos E, 1 + s cos E, 1 + cos E, 1 - cos E without cancellation.

    E = t, or E = pi - t when ``flip`` (so nodes next to E = pi keep full
    relative precision).  Next to |phi| = pi/2 and E in {0, pi} the direct
    forms lose ~10 digits; 1 +- cos E come from half angles and 1 -+ s from
    cos^2(phi)/(1 +- s).
    """
    c2 = 2.0 * math.cos(0.5 * t) ** 2
    s2 = 2.0 * math.sin(0.5 * t) ** 2
    if flip:
        x = -math.cos(t)
        opx, omx = s2, c2
    else:
        x = math.cos(t)
        opx, omx = c2, s2
    if s >= 0.0:
        u = omx + x * oms
        v = opx - x * oms
    else:
        u = opx - x * ops
        v = omx + x * ops
    return x, u, v, opx, omx


@njit(cache=True)
def _terms(mode, C, S, s, cp, oms, ops, t, flip):
    # (value, d/dpsi, d/dphi) of the integrand, see _factors for (t, flip)
    x, u, v, opx, omx = _factors(s, oms, ops, t, flip)
    w = math.sqrt(u / v)
    w_phi = -cp * x / (v * v * w)
    P = 2.0 * cp * S - s * C
    Q = 2.0 * cp * C + s * S
    # P x - C and Q x + S expanded about the nearer of x = +-1, where they
    # nearly vanish close to the singular set
    if flip:
        lin = P * opx - (2.0 * cp * S + C * oms)
        lin_psi = Q * opx - (2.0 * cp * C - S * oms)
    else:
        lin = (2.0 * cp * S - C * ops) - P * omx
        lin_psi = (2.0 * cp * C + S * ops) - Q * omx
    lin_phi = (-2.0 * s * S - cp * C) * x
    if mode == FULL:
        # I = (u/v) (lin^2 + sin^2 E u^2 S^2): a sum of squares, so sqrt(I)
        # keeps full relative accuracy where I nearly vanishes
        sin2 = opx * omx
        k = sin2 * u * u
        g = math.sqrt(lin * lin + k * S * S)
        if g == 0.0:
            return 0.0, 0.0, 0.0
        return (w * g,
                w * (lin * lin_psi + k * S * C) / g,
                w_phi * g + w * (lin * lin_phi - sin2 * u * cp * x * S * S) / g)
    return (w * lin,
            w * lin_psi,
            w_phi * lin + w * lin_phi)


@njit(cache=True)
def _oms_ops(s, cp):
    # (1 - s, 1 + s) with the small one taken from cos^2(phi)
    if s >= 0.0:
        return cp * cp / (1.0 + s), 1.0 + s
    return 1.0 - s, cp * cp / (1.0 - s)


@njit(cache=True)
def _gk15(mode, C, S, s, cp, oms, ops, flip, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    k0 = k1 = k2 = 0.0
    g0 = g1 = g2 = 0.0
    asc = 0.0
    for j in range(8):
        if j == 7:
            f0, f1, f2 = _terms(mode, C, S, s, cp, oms, ops, mid, flip)
            k0 += _WGK[7] * f0
            k1 += _WGK[7] * f1
            k2 += _WGK[7] * f2
            g0 += _WG[3] * f0
            g1 += _WG[3] * f1
            g2 += _WG[3] * f2
            asc += _WGK[7] * (abs(f0) + abs(f1) + abs(f2))
            continue
        dx = half * _XGK[j]
        u0, u1, u2 = _terms(mode, C, S, s, cp, oms, ops, mid - dx, flip)
        v0, v1, v2 = _terms(mode, C, S, s, cp, oms, ops, mid + dx, flip)
        k0 += _WGK[j] * (u0 + v0)
        k1 += _WGK[j] * (u1 + v1)
        k2 += _WGK[j] * (u2 + v2)
        asc += _WGK[j] * (abs(u0) + abs(u1) + abs(u2)
                          + abs(v0) + abs(v1) + abs(v2))
        if j % 2 == 1:
            wg = _WG[j // 2]
            g0 += wg * (u0 + v0)
            g1 += wg * (u1 + v1)
            g2 += wg * (u2 + v2)
    diff = max(abs(k0 - g0), abs(k1 - g1), abs(k2 - g2)) * abs(half)
    asc *= abs(half)
    # QUADPACK-style sharpening of the raw Kronrod-Gauss difference
    err = diff
    if asc != 0.0 and diff != 0.0:
        err = asc * min(1.0, (200.0 * diff / asc) ** 1.5)
    return k0 * half, k1 * half, k2 * half, err, asc


@njit(cache=True)
def _adapt(mode, C, S, s, cp, oms, ops, flip, a, b, tol_density):
    """Adaptive GK15 on [a, b]; pieces are split until err <= tol*len."""
    sa = np.empty(_STACK)
    sb = np.empty(_STACK)
    sd = np.empty(_STACK, dtype=np.int64)
    top = 0
    sa[0] = a
    sb[0] = b
    sd[0] = 0
    r0 = r1 = r2 = 0.0
    etot = 0.0
    status = OK
    while top >= 0:
        lo = sa[top]
        hi = sb[top]
        depth = sd[top]
        top -= 1
        i0, i1, i2, err, asc = _gk15(mode, C, S, s, cp, oms, ops, flip, lo, hi)
        # roundoff floor: nothing is gained below ~50 eps of int |f|
        if (err <= tol_density * (hi - lo) or err <= 1e-14 * asc
                or depth >= MAX_DEPTH or top + 2 >= _STACK):
            r0 += i0
            r1 += i1
            r2 += i2
            etot += err
            continue
        m = 0.5 * (lo + hi)
        top += 1
        sa[top] = m
        sb[top] = hi
        sd[top] = depth + 1
        top += 1
        sa[top] = lo
        sb[top] = m
        sd[top] = depth + 1
    # a corner next to |phi| = pi/2 can defeat the per-piece test while the
    # total stays within budget; only the total decides failure
    if etot > tol_density * (b - a):
        status = DEPTH_EXHAUSTED
    return r0, r1, r2, etot, status


@njit(cache=True)
def _integrate(mode, C, S, s, cp, a, b, tol_density):
    """int_a^b over E, with [pi/2, pi] handled in t = pi - E."""
    oms, ops = _oms_ops(s, cp)
    h = 0.5 * math.pi
    r0 = r1 = r2 = e = 0.0
    st = OK
    if a < h:
        u0, u1, u2, ue, us = _adapt(mode, C, S, s, cp, oms, ops, False, a, min(b, h),
                                    tol_density)
        r0 += u0
        r1 += u1
        r2 += u2
        e += ue
        st = max(st, us)
    if b > h:
        lo = math.pi - b
        hi = math.pi - max(a, h)
        u0, u1, u2, ue, us = _adapt(mode, C, S, s, cp, oms, ops, True, lo, hi,
                                    tol_density)
        r0 += u0
        r1 += u1
        r2 += u2
        e += ue
        st = max(st, us)
    return r0, r1, r2, e, st


@njit(cache=True)
def r_and_p(psi, phi):
    C = math.cos(psi)
    P = 2.0 * math.cos(phi) * math.sin(psi) - math.sin(phi) * C
    if P == 0.0:
        if C == 0.0:
            return math.nan, P
        return math.copysign(math.inf, C), P
    return C / P, P


@njit(cache=True)
def density(mode, psi, phi, tol):
    """Return (H, H_psi, H_phi, err, status) with H = L or M at (psi, phi).

    ``tol`` is an absolute tolerance on each of the three outputs.
    """
    C = math.cos(psi)
    S = math.sin(psi)
    s = math.sin(phi)
    cp = math.cos(phi)
    pi = math.pi
    if mode == FULL:
        h0, h1, h2, e, st = _integrate(mode, C, S, s, cp, 0.0, pi, tol)
        return h0 / pi, h1 / pi, h2 / pi, e / pi, st
    R, P = r_and_p(psi, phi)
    if math.isnan(R) or abs(R) >= 1.0:
        sgn = -1.0 if C > 0.0 else 1.0
        h0, h1, h2, e, st = _integrate(mode, C, S, s, cp, 0.0, pi, tol)
        return sgn * h0 / pi, sgn * h1 / pi, sgn * h2 / pi, e / pi, st
    # J changes sign at cos E = R; the integrand vanishes there so the
    # Leibniz boundary terms of the partials drop out
    estar = math.acos(R)
    sgn = 1.0 if P > 0.0 else -1.0
    u0, u1, u2, e1, st1 = _integrate(mode, C, S, s, cp, 0.0, estar, tol)
    v0, v1, v2, e2, st2 = _integrate(mode, C, S, s, cp, estar, pi, tol)
    st = max(st1, st2)
    return (sgn * (u0 - v0) / pi, sgn * (u1 - v1) / pi, sgn * (u2 - v2) / pi,
            (e1 + e2) / pi, st)


@njit(cache=True)
def field(mode, psi, phi, tol):
    """Return (a, b, c, H, H_phi, status) of the reduced vector field."""
    H, Hpsi, Hphi, err, st = density(mode, psi, phi, tol)
    C = math.cos(psi)
    S = math.sin(psi)
    a = -(H * S + Hphi * C)
    b = H * S + Hpsi * C
    c = H * C - Hpsi * S
    return a, b, c, H, Hphi, st


@njit(cache=True)
def flow_rhs(y, mode, tol, n0_cbrt, sign_a):
    """Augmented reduced flow.

    y = (psi, phi, lam, t_phys, log_rho); lam = int c, n = n0 exp(3 lam),
    dt/dtau = n^(1/3), d(log rho)/dtau = H cos(psi) - H_phi sin(psi).
    ``sign_a`` multiplies a (test hook for the validation mutation check).
    """
    psi = y[0]
    phi = y[1]
    a, b, c, H, Hphi, st = field(mode, psi, phi, tol)
    out = np.empty(5)
    out[0] = sign_a * a
    out[1] = b
    out[2] = c
    out[3] = n0_cbrt * math.exp(y[2])
    out[4] = H * math.cos(psi) - Hphi * math.sin(psi)
    return out, st


@njit(cache=True)
def flow_rhs_plain(psi, phi, mode, tol, sign_a):
    a, b, c, H, Hphi, st = field(mode, psi, phi, tol)
    return sign_a * a, b, st
