"""Reduced vector field (a, b, c) on the cylinder.

With ``H`` standing for ``L`` or ``M``::

    a = -(H sin psi + H_phi cos psi)
    b =   H sin psi + H_psi cos psi
    c =   H cos psi - H_psi sin psi

so that d(psi)/d(tau) = a, d(phi)/d(tau) = b and d(log n)/d(tau) = 3c.
Also: closed-form values on special lines, the saddle data at (0, 0) and
the zero curve Z_b of b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import integrate, optimize

from . import _kernels as K
from .errors import BracketFailure, DomainError, QuadratureNonConvergence, VerificationFailed
from .hamiltonian import DEFAULT_TOL, HALF_PI, ControlMode, _coerce, integrand_I

SQRT10 = math.sqrt(10.0)


@dataclass(frozen=True)
class FieldEval:
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class SaddleData:
    jacobian: np.ndarray
    eig_unstable: tuple[float, np.ndarray]
    eig_stable: tuple[float, np.ndarray]
    sigma_bar: float
    fd_jacobian: np.ndarray = dc_field(repr=False)
    verified: bool = True


def eval_field(point, mode: ControlMode = ControlMode.FULL,
               tol: float = DEFAULT_TOL) -> FieldEval:
    p = _coerce(point)
    mode = ControlMode.parse(mode)
    a, b, c, _, _, st = K.field(mode.code, p.psi, p.phi, tol)
    if st != K.OK:
        raise QuadratureNonConvergence(f"field at ({p.psi}, {p.phi})")
    return FieldEval(a, b, c)


def field_array(psi: np.ndarray, phi: np.ndarray, mode: ControlMode = ControlMode.FULL,
                tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (a, b, c) on matching arrays of points."""
    code = ControlMode.parse(mode).code
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = np.empty((3,) + psi.shape)
    for idx in np.ndindex(psi.shape):
        a, b, c, _, _, _ = K.field(code, psi[idx], phi[idx], tol)
        out[0][idx], out[1][idx], out[2][idx] = a, b, c
    return out[0], out[1], out[2]


# ---------------------------------------------------------------- closed forms

def _ellip_cos2(phi: float) -> float:
    # int_0^pi cos^2 E / sqrt(1 - sin^2(phi) cos^2 E) dE
    s2 = math.sin(phi) ** 2
    val, _ = integrate.quad(lambda E: math.cos(E) ** 2 / math.sqrt(1.0 - s2 * math.cos(E) ** 2),
                            0.0, math.pi, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def a_on_psi0(phi: float) -> float:
    """a(0, phi); the same expression holds in both control modes."""
    return math.cos(phi) * math.sin(phi) / math.pi * _ellip_cos2(phi)


def b_on_psi0_full(phi: float) -> float:
    """Full control b(0, phi); b(-pi, phi) is its negative."""
    return 2.0 * math.cos(phi) * math.sin(phi) / math.pi * _ellip_cos2(phi)


def b_psi_full(psi: float, phi: float) -> float:
    """Full control db/dpsi as a positive-kernel integral times cos(psi).

    b_psi = cos(psi) (L + L_psipsi) and, I being a quadratic form in
    (cos psi, sin psi), sqrt(I) + (sqrt(I))'' = det / I^(3/2) with
    det = sin^2 E (1 - sin(phi) cos E)^4.
    """
    s = math.sin(phi)

    def f(E):
        x = math.cos(E)
        return (1.0 - s * x) ** 4 * math.sin(E) ** 2 / integrand_I((psi, phi), E) ** 1.5

    val, _ = integrate.quad(f, 0.0, math.pi, epsabs=1e-13, epsrel=1e-13, limit=400)
    return math.cos(psi) / math.pi * val


def a_on_half_pi_tangential(phi: float, side: int = 1) -> float:
    """Tangential a(side*pi/2, phi) for phi != 0.

    Includes the 1/pi of the average (check: M(pi/2, 0) = 4/pi
    gives a(pi/2, 0) = -4/pi, the phi -> 0 limit of this expression).
    """
    if phi == 0.0:
        return -side * 4.0 / math.pi
    s = math.sin(phi)
    return (-side * 2.0 * abs(math.cos(phi)) / s * math.log((1.0 + s) / (1.0 - s))
            / math.pi)


def b_on_phi0_tangential(psi: float) -> float:
    """Tangential b(psi, 0): zero on R1 (|tan psi| <= 1/2)."""
    t = math.tan(psi)
    if abs(t) <= 0.5:
        return 0.0
    cot2 = 1.0 / (t * t)
    return math.copysign(1.0, math.sin(psi)) * 2.0 / math.pi * math.sqrt(4.0 - cot2)


def b_R1_tangential(psi: float, phi: float) -> float:
    """Tangential b on R1, where it does not depend on psi."""
    R, _ = K.r_and_p(psi, phi)
    if not abs(R) >= 1.0:
        raise DomainError("formula valid on R1 only")
    return math.copysign(1.0, math.cos(psi)) * b_on_psi0_full(phi)


def b_psi_R2_tangential(psi: float, phi: float) -> float:
    """Tangential db/dpsi on R2.

    Only the split point E* contributes (J + J_psipsi = 0), which gives
    8 cos^2(phi) R (1 - R sin phi) sgn(P) / (pi sqrt(1-R^2) sqrt(1-R^2 sin^2 phi) P^2).
    """
    R, P = K.r_and_p(psi, phi)
    if not abs(R) < 1.0:
        raise DomainError("formula valid on R2 only")
    s, cp = math.sin(phi), math.cos(phi)
    den = math.pi * math.sqrt(1.0 - R * R) * math.sqrt(1.0 - R * R * s * s) * P * P
    return math.copysign(1.0, P) * 8.0 * cp * cp * R * (1.0 - R * s) / den


_CLOSED = {
    ("a_psi0", ControlMode.FULL): lambda phi: a_on_psi0(phi),
    ("a_psi0", ControlMode.TANGENTIAL): lambda phi: a_on_psi0(phi),
    ("a_psipi", ControlMode.FULL): lambda phi: -a_on_psi0(phi),
    ("a_psipi", ControlMode.TANGENTIAL): lambda phi: -a_on_psi0(phi),
    ("b_psi0", ControlMode.FULL): lambda phi: b_on_psi0_full(phi),
    ("b_psi_minus_pi", ControlMode.FULL): lambda phi: -b_on_psi0_full(phi),
    ("b_psi", ControlMode.FULL): lambda psi, phi: b_psi_full(psi, phi),
    ("a_half_pi", ControlMode.TANGENTIAL): lambda phi: a_on_half_pi_tangential(phi, 1),
    ("a_minus_half_pi", ControlMode.TANGENTIAL): lambda phi: a_on_half_pi_tangential(phi, -1),
    ("b_phi0", ControlMode.TANGENTIAL): lambda psi: b_on_phi0_tangential(psi),
    ("b_R1", ControlMode.TANGENTIAL): lambda psi, phi: b_R1_tangential(psi, phi),
    ("b_psi_R2", ControlMode.TANGENTIAL): lambda psi, phi: b_psi_R2_tangential(psi, phi),
}


def closed_forms(selector: str, mode: ControlMode, *args: float) -> float:
    """Dispatch to a special-line formula by name.

    Selectors: a_psi0, a_psipi (both modes); b_psi0, b_psi_minus_pi, b_psi
    (full); a_half_pi, a_minus_half_pi, b_phi0, b_R1, b_psi_R2 (tangential).
    """
    mode = ControlMode.parse(mode)
    try:
        fn = _CLOSED[(selector, mode)]
    except KeyError:
        raise DomainError(f"no closed form {selector!r} for mode {mode.value}") from None
    return fn(*args)


# ---------------------------------------------------------------- saddle

def fd_jacobian(mode: ControlMode, psi: float = 0.0, phi: float = 0.0,
                h: float = 1e-4, tol: float = 1e-13) -> np.ndarray:
    """Central-difference Jacobian of (a, b) with respect to (psi, phi)."""
    code = ControlMode.parse(mode).code
    J = np.empty((2, 2))
    for j, (dp, df) in enumerate(((h, 0.0), (0.0, h))):
        ap, bp, *_ = K.field(code, psi + dp, phi + df, tol)
        am, bm, *_ = K.field(code, psi - dp, phi - df, tol)
        J[0, j] = (ap - am) / (2.0 * h)
        J[1, j] = (bp - bm) / (2.0 * h)
    return J


def saddle(mode: ControlMode, verify: bool = True) -> SaddleData:
    """Linearisation of (a, b) at the saddle (0, 0).

    The tabulated values are returned as is; ``fd_jacobian`` records the
    numerical check.  (0, 0) lies inside R1 in the tangential case, so central
    differences are valid there too.
    """
    mode = ControlMode.parse(mode)
    if mode is ControlMode.FULL:
        J = np.array([[-2.0, 0.5], [0.5, 1.0]])
        unst = ((SQRT10 - 1.0) / 2.0, np.array([SQRT10 - 3.0, 1.0]))
        stab = (-(SQRT10 + 1.0) / 2.0, np.array([-SQRT10 - 3.0, 1.0]))
        sigma = 0.0
    else:
        J = np.array([[-2.0, 0.5], [0.0, 1.0]])
        unst = (1.0, np.array([1.0 / 6.0, 1.0]))
        stab = (-2.0, np.array([1.0, 0.0]))
        sigma = math.atan(0.5)
    fd = fd_jacobian(mode) if verify else J.copy()
    dev = float(np.max(np.abs(fd - J)))
    if dev > 1e-3:
        raise VerificationFailed(f"saddle Jacobian deviates by {dev:.2e}")
    return SaddleData(J, unst, stab, sigma, fd, dev <= 1e-4)


# ---------------------------------------------------------------- Z_b

def zb_bracket(phi: float, mode: ControlMode) -> tuple[float, float]:
    mode = ControlMode.parse(mode)
    if mode is ControlMode.FULL:
        return -HALF_PI, 0.0
    return -HALF_PI, math.atan((-1.0 + math.sin(phi)) / (2.0 * math.cos(phi)))


def find_Zb(phi: float, mode: ControlMode = ControlMode.FULL,
            tol: float = DEFAULT_TOL) -> float:
    """The zero psi of b(., phi) in (-pi/2, 0), for 0 <= phi < pi/2."""
    mode = ControlMode.parse(mode)
    if not 0.0 <= phi < HALF_PI:
        raise DomainError("Z_b is defined for 0 <= phi < pi/2")
    if phi == 0.0:
        return 0.0 if mode is ControlMode.FULL else -math.atan(0.5)
    lo, hi = zb_bracket(phi, mode)
    # b(0, phi) > 0 and the tangential upper end lies on S where b > 0, so
    # only the lower end needs an inset
    lo += 1e-6
    code = mode.code
    qtol = min(tol, 1e-12)

    def b(psi):
        return K.field(code, psi, phi, qtol)[1]

    blo, bhi = b(lo), b(hi)
    if not (blo < 0.0 < bhi):
        raise BracketFailure(f"b({lo:.6f})={blo:.3e}, b({hi:.6f})={bhi:.3e} at phi={phi}")
    z = optimize.brentq(b, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    # a steep crossing (next to S at small phi) may leave |b| above tol
    # even though the sign change is resolved to a few ulps
    if abs(b(z)) >= tol and not b(z - 1e-14) <= 0.0 <= b(z + 1e-14):
        raise BracketFailure(f"|b(Z_b)|={abs(b(z)):.2e} exceeds tol at phi={phi}")
    return z
