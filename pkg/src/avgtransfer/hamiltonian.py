"""Averaged minimum-time Hamiltonian densities ``L`` and ``M``.

In polar costate coordinates the averaged Hamiltonians factor as
``H = rho * n**(-1/3) * L(psi, phi)`` (full control) and
``H = rho * n**(-1/3) * M(psi, phi)`` (tangential thrust), with
``e = sin(phi)``, ``3 n p_n = rho cos(psi)`` and ``cos(phi) p_e = rho sin(psi)``.

The densities are averages over the eccentric anomaly ``E`` of
``sqrt(I)`` and ``|J|``; see :func:`integrand_I` and :func:`integrand_J`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _kernels as K
from .errors import DomainError, QuadratureNonConvergence, SingularCircular

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

DEFAULT_TOL = 1e-10
# | |R| - 1 | below this is reported as NearS
EPS_S = 1e-3


def wrap(psi: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    r = math.remainder(psi, TWO_PI)
    return math.pi if r == -math.pi else r


@dataclass(frozen=True)
class CylinderPoint:
    """Point (psi, phi) of the cylinder; psi is kept unwrapped."""

    psi: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.psi) and math.isfinite(self.phi)):
            raise DomainError(f"non-finite cylinder point ({self.psi}, {self.phi})")
        if abs(self.phi) >= HALF_PI:
            raise DomainError(f"|phi| must be < pi/2, got {self.phi}")

    @property
    def psi_reduced(self) -> float:
        return wrap(self.psi)

    def isclose(self, other: "CylinderPoint", tol: float = 1e-12) -> bool:
        return (abs(self.phi - other.phi) <= tol
                and abs(wrap(self.psi - other.psi)) <= tol)


class ControlMode(enum.Enum):
    FULL = "full"
    TANGENTIAL = "tangential"

    @property
    def code(self) -> int:
        return K.FULL if self is ControlMode.FULL else K.TANGENTIAL

    @classmethod
    def parse(cls, s) -> "ControlMode":
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower()
        if key in ("full", "fullcontrol", "full_control", "l"):
            return cls.FULL
        if key in ("tangential", "tan", "t", "m"):
            return cls.TANGENTIAL
        raise DomainError(f"unknown control mode {s!r}")


@dataclass(frozen=True)
class RegionTag:
    """``kind`` is "R1", "R2" or "NearS"; ``distance`` is |R| - 1."""

    kind: str
    distance: float

    def __str__(self):
        if self.kind == "NearS":
            return f"NearS({self.distance:.3e})"
        return self.kind


@dataclass(frozen=True)
class HamEval:
    value: float
    d_psi: float
    d_phi: float
    region: RegionTag
    quad_error_estimate: float


@dataclass(frozen=True)
class ExtremalState:
    """State and costate (n, e, p_n, p_e)."""

    n: float
    e: float
    p_n: float
    p_e: float

    def __post_init__(self):
        if not self.n > 0.0:
            raise DomainError(f"n must be positive, got {self.n}")
        if not abs(self.e) < 1.0:
            raise DomainError(f"|e| must be < 1, got {self.e}")

    @classmethod
    def from_polar(cls, n: float, phi: float, psi: float, rho: float) -> "ExtremalState":
        return cls(n, math.sin(phi), rho * math.cos(psi) / (3.0 * n),
                   rho * math.sin(psi) / math.cos(phi))

    def polar(self) -> tuple[float, float, float, float]:
        """Return (n, phi, psi, rho)."""
        phi = math.asin(self.e)
        x = 3.0 * self.n * self.p_n
        y = math.cos(phi) * self.p_e
        rho = math.hypot(x, y)
        if rho == 0.0:
            raise DomainError("polar form undefined for a zero costate")
        return self.n, phi, math.atan2(y, x), rho


def _coerce(point) -> CylinderPoint:
    if isinstance(point, CylinderPoint):
        return point
    psi, phi = point
    return CylinderPoint(float(psi), float(phi))


def integrand_I(point, E: float) -> float:
    """Full-control integrand (a quadratic form in (cos psi, sin psi))."""
    p = _coerce(point)
    return K.integrand_I(math.cos(p.psi), math.sin(p.psi), math.sin(p.phi),
                         math.cos(p.phi), math.cos(E))


def integrand_J(point, E: float) -> float:
    """Tangential integrand; its sign is constant in E exactly on R1."""
    p = _coerce(point)
    return K.integrand_J(math.cos(p.psi), math.sin(p.psi), math.sin(p.phi),
                         math.cos(p.phi), math.cos(E))


def R_and_P(point) -> tuple[float, float]:
    """Return (R, P) with P = 2 cos(phi) sin(psi) - sin(phi) cos(psi), R = cos(psi)/P.

    R is +-inf when P = 0 and cos(psi) != 0, and nan when both vanish.
    """
    p = _coerce(point)
    return K.r_and_p(p.psi, p.phi)


def region(point) -> RegionTag:
    p = _coerce(point)
    R, _ = K.r_and_p(p.psi, p.phi)
    if math.isnan(R):
        # both P and cos(psi) vanish: classify from a nearby point
        R, _ = K.r_and_p(p.psi + 1e-9, p.phi)
    d = abs(R) - 1.0
    if abs(d) < EPS_S:
        return RegionTag("NearS", d)
    return RegionTag("R1" if d > 0.0 else "R2", d)


def _eval(mode: int, point, tol: float) -> HamEval:
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    p = _coerce(point)
    h, hpsi, hphi, err, status = K.density(mode, p.psi, p.phi, tol)
    if status != K.OK:
        raise QuadratureNonConvergence(
            f"subdivision depth exhausted at ({p.psi}, {p.phi}), tol={tol}")
    return HamEval(h, hpsi, hphi, region(p), err)


def eval_L(point, tol: float = DEFAULT_TOL) -> HamEval:
    """L(psi, phi) = (1/pi) int_0^pi sqrt(I) dE with both partials."""
    return _eval(K.FULL, point, tol)


def eval_M(point, tol: float = DEFAULT_TOL) -> HamEval:
    """M(psi, phi) = (1/pi) int_0^pi |J| dE with both partials.

    On R2 the integral is split at E* = arccos R, where J changes sign.
    """
    return _eval(K.TANGENTIAL, point, tol)


def eval_density(mode: ControlMode, point, tol: float = DEFAULT_TOL) -> HamEval:
    return _eval(ControlMode.parse(mode).code, point, tol)


def _h12(n, e, p_n, p_e, v):
    g = math.sqrt(1.0 + 2.0 * e * math.cos(v) + e * e)
    q = math.sqrt(1.0 - e * e)
    h1 = (-3.0 * n * p_n * g / q + 2.0 * p_e * (e + math.cos(v)) * q / g) / n ** (1.0 / 3.0)
    h2 = -p_e * math.sin(v) * q ** 3 / ((1.0 + e * math.cos(v)) * g) / n ** (1.0 / 3.0)
    return h1, h2


def _h1_roots(n, e, p_n, p_e):
    # h1 = 0 is linear in cos(v)
    A = 2.0 * p_e * (1.0 - e * e) - 6.0 * n * p_n * e
    B = 3.0 * n * p_n * (1.0 + e * e) - 2.0 * p_e * e * (1.0 - e * e)
    if A == 0.0 or abs(B / A) > 1.0:
        return []
    v = math.acos(B / A)
    return [v, TWO_PI - v]


def ham_time_direct(state: ExtremalState, mode: ControlMode = ControlMode.FULL,
                    tol: float = 1e-12) -> float:
    """Averaged time Hamiltonian by quadrature over the true anomaly.

    Independent of the densities: used to cross-check the polar factorisation.
    """
    mode = ControlMode.parse(mode)
    n, e, p_n, p_e = state.n, state.e, state.p_n, state.p_e

    if mode is ControlMode.FULL:
        def f(v):
            h1, h2 = _h12(n, e, p_n, p_e, v)
            return math.hypot(h1, h2) / (1.0 + e * math.cos(v)) ** 2
    else:
        def f(v):
            h1, _ = _h12(n, e, p_n, p_e, v)
            return abs(h1) / (1.0 + e * math.cos(v)) ** 2

    # breakpoints where the integrand has a kink
    pts = sorted(set(_h1_roots(n, e, p_n, p_e) + [math.pi]))
    edges = [0.0] + pts + [TWO_PI]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 0.0:
            continue
        val, err = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=400)
        if err > 1e3 * tol * max(1.0, abs(val)):
            raise QuadratureNonConvergence(f"direct quadrature error {err:.2e}")
        total += val
    return (1.0 - e * e) ** 1.5 / TWO_PI * total


def ham_energy(state: ExtremalState, p_omega: float = 0.0) -> float:
    """Averaged energy Hamiltonian (up to a positive factor)."""
    n, e = state.n, state.e
    if p_omega != 0.0 and e == 0.0:
        raise SingularCircular("p_omega != 0 is singular on circular orbits")
    val = 18.0 * n * n * state.p_n ** 2 + 5.0 * (1.0 - e * e) * state.p_e ** 2
    if p_omega != 0.0:
        val += (5.0 - 4.0 * e * e) / (e * e) * p_omega ** 2
    return val * n ** (-5.0 / 3.0)


def ham_energy_polar(n: float, phi: float, psi: float, rho: float) -> float:
    """Energy Hamiltonian with p_omega = 0 in the polar costate form."""
    return n ** (-5.0 / 3.0) * rho * rho * (2.0 * math.cos(psi) ** 2
                                            + 5.0 * math.sin(psi) ** 2)


def trapezoid_density(mode: ControlMode, point, npts: int = 1_000_001) -> float:
    """Brute-force trapezoid value of L or M (test oracle, vectorised)."""
    p = _coerce(point)
    E = np.linspace(0.0, math.pi, npts)
    x = np.cos(E)
    C, S = math.cos(p.psi), math.sin(p.psi)
    s, cp = math.sin(p.phi), math.cos(p.phi)
    if ControlMode.parse(mode) is ControlMode.FULL:
        a11 = 1.0 - s * s * x * x
        a12 = -2.0 * cp * (1.0 - s * x) * x
        a22 = (1.0 - s * x) * (1.0 - 3.0 * s * x + 3.0 * x * x - s * x ** 3)
        f = np.sqrt(np.maximum(a11 * C * C + 2.0 * a12 * C * S + a22 * S * S, 0.0))
    else:
        w = np.sqrt((1.0 - s * x) / (1.0 + s * x))
        f = np.abs(w * ((2.0 * cp * S - s * C) * x - C))
    return float(np.trapezoid(f, E) / math.pi)
