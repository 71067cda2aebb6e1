"""Minimum-energy averaged transfer toward circular orbits.

With p_omega = 0 the averaged energy metric in (n, e) is

    g = dn^2 / (9 n^(1/3)) + 2 n^(5/3) / (5 (1 - e^2)) de^2

and r = k n^(5/6), theta = arcsin(e) / c with c = sqrt(2/5) turn it into
the polar form of the flat metric (up to a constant factor set by k).  The
image of the orbit domain is the sector |theta| < pi / (2c), whose opening
exceeds pi: chords between points whose angles differ by more than pi leave
it, so the domain is not geodesically convex.

The reduced energy flow on the cylinder has two lines of equilibria,
psi = 0 and psi = pi, and the first integral phi + c g(psi) with g the
continuous branch of arctan(tan(psi) / c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .errors import DomainError, OutOfSector
from .hamiltonian import HALF_PI

C_ENERGY = math.sqrt(2.0 / 5.0)
K_ENERGY = 1.0 / C_ENERGY
# radial scale of the flat coordinates; any constant works
R_SCALE = 2.0 ** 1.5 / 5.0
THETA_MAX = HALF_PI / C_ENERGY
MAX_DPHI = C_ENERGY * math.pi
SECTOR_MARGIN = 1e-12


@dataclass(frozen=True)
class OrbitPair:
    n: float
    e: float

    def __post_init__(self):
        if not self.n > 0.0:
            raise DomainError(f"n must be positive, got {self.n}")
        if not abs(self.e) < 1.0:
            raise DomainError(f"|e| must be < 1, got {self.e}")


@dataclass(frozen=True)
class FlatPoint:
    x: float
    z: float

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.z)

    @property
    def theta(self) -> float:
        return math.atan2(self.x, self.z)


def _pair(p) -> OrbitPair:
    return p if isinstance(p, OrbitPair) else OrbitPair(*map(float, p))


def to_flat(n: float, e: float) -> FlatPoint:
    p = OrbitPair(n, e)
    r = R_SCALE * p.n ** (5.0 / 6.0)
    th = math.asin(p.e) / C_ENERGY
    return FlatPoint(r * math.sin(th), r * math.cos(th))


def from_flat(pt: FlatPoint) -> OrbitPair:
    r = pt.r
    th = pt.theta
    if r == 0.0 or abs(th) >= THETA_MAX:
        raise OutOfSector(f"({pt.x}, {pt.z}) is outside the orbit sector")
    return OrbitPair((r / R_SCALE) ** 1.2, math.sin(C_ENERGY * th))


# ---------------------------------------------------------------- metric

def metric(n: float, e: float) -> tuple[float, float]:
    """Diagonal coefficients (g_nn, g_ee)."""
    return 1.0 / (9.0 * n ** (1.0 / 3.0)), 2.0 * n ** (5.0 / 3.0) / (5.0 * (1.0 - e * e))


def metric_phi(n: float, phi: float = 0.0) -> tuple[float, float]:
    """Diagonal coefficients (g_nn, g_phiphi) with e = sin(phi)."""
    return 1.0 / (9.0 * n ** (1.0 / 3.0)), 0.4 * n ** (5.0 / 3.0)


def gauss_curvature(E, G, u: float, v: float, h: float = 1e-4) -> float:
    """Gauss curvature of E du^2 + G dv^2 by nested central differences."""

    def du(f, a, b):
        return (f(a + h, b) - f(a - h, b)) / (2.0 * h)

    def dv(f, a, b):
        return (f(a, b + h) - f(a, b - h)) / (2.0 * h)

    def root(a, b):
        return math.sqrt(E(a, b) * G(a, b))

    def t1(a, b):
        return du(G, a, b) / root(a, b)

    def t2(a, b):
        return dv(E, a, b) / root(a, b)

    return -(du(t1, u, v) + dv(t2, u, v)) / (2.0 * root(u, v))


def curvature_grid(ns, es, h: float = 1e-4) -> np.ndarray:
    """Curvature of the (n, e) energy metric on a grid."""
    E = lambda n, e: metric(n, e)[0]  # noqa: E731
    G = lambda n, e: metric(n, e)[1]  # noqa: E731
    return np.array([[gauss_curvature(E, G, n, e, h) for e in es] for n in ns])


def geodesic_residual(n: np.ndarray, phi: np.ndarray, s: np.ndarray) -> float:
    """Largest residual of the geodesic equations along a sampled curve.

    Derivatives come from 5-point stencils on a uniform parameter grid; the
    two samples at each end are skipped.  Scaled by the squared speed.
    """
    h = s[1] - s[0]

    def d1(y):
        return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12.0 * h)

    def d2(y):
        return (-y[:-4] + 16 * y[1:-3] - 30 * y[2:-2] + 16 * y[3:-1] - y[4:]) / (12.0 * h * h)

    nn = n[2:-2]
    un, vn = d1(n), d1(phi)
    an, vp = d2(n), d2(phi)
    E = 1.0 / (9.0 * nn ** (1.0 / 3.0))
    G = 0.4 * nn ** (5.0 / 3.0)
    Eu = -1.0 / 27.0 * nn ** (-4.0 / 3.0)
    Gu = 2.0 / 3.0 * nn ** (2.0 / 3.0)
    r1 = an + Eu / (2 * E) * un ** 2 - Gu / (2 * E) * vn ** 2
    r2 = vp + Gu / G * un * vn
    # residuals in an orthonormal frame, against the squared speed
    res = np.sqrt(E * r1 ** 2 + G * r2 ** 2)
    speed2 = E * un ** 2 + G * vn ** 2
    return float(np.max(res) / max(np.max(speed2), 1e-300))


@dataclass
class EnergyGeodesic:
    reachable: bool
    s: Optional[np.ndarray] = None
    n: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None
    witness: Optional[FlatPoint] = None
    witness_s: Optional[float] = None
    residual: float = 0.0


def energy_geodesic(p0, p1, num: int = 2001) -> EnergyGeodesic:
    """Straight chord between the flat images of two orbits.

    Succeeds iff the open chord stays in the sector; otherwise reports the
    first point where it leaves.
    """
    p0, p1 = _pair(p0), _pair(p1)
    a, b = to_flat(p0.n, p0.e), to_flat(p1.n, p1.e)
    if p0 == p1:
        return EnergyGeodesic(True, np.zeros(1), np.array([p0.n]), np.array([p0.e]))
    dth = abs(a.theta - b.theta)
    if dth < math.pi - SECTOR_MARGIN:
        s = np.linspace(0.0, 1.0, num)
        x = a.x + s * (b.x - a.x)
        z = a.z + s * (b.z - a.z)
        r = np.hypot(x, z)
        th = np.arctan2(x, z)
        n = (r / R_SCALE) ** 1.2
        phi = C_ENERGY * th
        res = geodesic_residual(n, phi, s) if num >= 5 else 0.0
        return EnergyGeodesic(True, s, n, np.sin(phi), residual=res)

    def point(t):
        return a.x + t * (b.x - a.x), a.z + t * (b.z - a.z)

    def excess(t):
        return abs(math.atan2(*point(t))) - THETA_MAX

    ts = np.linspace(0.0, 1.0, 4097)
    k = next((i for i, t in enumerate(ts) if excess(t) >= 0.0 or math.hypot(*point(t)) == 0.0),
             None)
    if k is None or k == 0:
        # the chord runs through the apex r = 0
        t = 0.5 if k is None else 0.0
    else:
        t = optimize.brentq(excess, ts[k - 1], ts[k], xtol=1e-15)
    return EnergyGeodesic(False, witness=FlatPoint(*point(t)), witness_s=float(t))


def energy_reachable(phi0: float, phi1: float) -> bool:
    """Whether the energy geodesic between the two eccentricity angles exists.

    The chord stays in the sector iff the polar angles differ by less than
    pi, i.e. |phi1 - phi0| < sqrt(2/5) pi.  The alternative form for phi0
    next to -pi/2, |phi0| > (sqrt(2/5) - 1/2) pi, is the same bound written
    for the far end of the domain.
    """
    for p in (phi0, phi1):
        if not abs(p) < HALF_PI:
            raise DomainError("phi must lie in (-pi/2, pi/2)")
    return abs(phi1 - phi0) < MAX_DPHI


# ---------------------------------------------------------------- phase flow

def energy_field(psi: float, phi: float = 0.0) -> tuple[float, float]:
    sp = math.sin(psi)
    return -sp * (2.0 + 3.0 * sp * sp), 2.0 * sp


def smooth_branch(psi):
    """Continuous branch of arctan(tan(psi) / c) that equals psi at k pi."""
    s, c = np.sin(psi), np.cos(psi)
    return psi + np.arctan((K_ENERGY - 1.0) * s * c / (c * c + K_ENERGY * s * s))


def first_integral(psi, phi):
    return phi + C_ENERGY * smooth_branch(psi)


@dataclass
class EnergyTrajectory:
    tau: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    reason: str

    def first_integral(self) -> np.ndarray:
        return first_integral(self.psi, self.phi)

    def drift(self) -> float:
        f = self.first_integral()
        return float(np.max(np.abs(f - f[0])))


def energy_phase_flow(psi0: float, phi0: float, horizon: float, num: int = 401,
                      rtol: float = 1e-12, atol: float = 1e-13,
                      phi_margin: float = 1e-6) -> EnergyTrajectory:
    """Integrate the reduced energy flow for tau in [0, horizon] (either sign)."""
    if not abs(phi0) < HALF_PI:
        raise DomainError("phi0 must lie in (-pi/2, pi/2)")

    def rhs(_, y):
        return energy_field(y[0])

    def edge(_, y):
        return HALF_PI - phi_margin - abs(y[1])

    edge.terminal = True
    if horizon == 0.0:
        return EnergyTrajectory(np.zeros(1), np.array([psi0]), np.array([phi0]), "tau")
    sol = solve_ivp(rhs, (0.0, horizon), [psi0, phi0], method="DOP853", rtol=rtol,
                    atol=atol, events=edge, dense_output=True)
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, num)
    y = sol.sol(ts)
    y[:, -1] = sol.y[:, -1]
    reason = "boundary" if sol.status == 1 else "tau"
    return EnergyTrajectory(ts, y[0], y[1], reason)


def heteroclinic_dphi(eps: float = 1e-4, phi0: Optional[float] = None,
                      horizon: float = 60.0) -> float:
    """phi gained along the arc from psi = pi - eps down to psi = eps."""
    if phi0 is None:
        phi0 = -0.5 * MAX_DPHI
    sol = solve_ivp(lambda _, y: energy_field(y[0]), (0.0, horizon),
                    [math.pi - eps, phi0], method="DOP853", rtol=1e-12, atol=1e-14,
                    events=lambda _, y: y[0] - eps)
    if not sol.t_events[0].size:
        raise DomainError("arc did not reach psi = eps within the horizon")
    return float(sol.y_events[0][0][1] - phi0)


# ---------------------------------------------------------------- tangential thrust

def e_tangential(phi):
    """Eccentricity of the twisted coordinate used for the tangential metric."""
    return np.sin(phi) * np.sqrt(1.0 + np.cos(phi) ** 2)


def G_t(phi):
    """Normal-form omega coefficient for the tangential energy metric."""
    s2 = np.sin(phi) ** 2
    return s2 * ((1.0 - 0.5 * s2) / (1.0 - s2)) ** 2


def tangential_metric(n: float, e: float) -> tuple[float, float, float]:
    """(g_nn, g_ee, g_omega) of the tangential-thrust energy metric."""
    q = math.sqrt(1.0 - e * e)
    base = (1.0 + q) * n ** (5.0 / 3.0) / (4.0 * (1.0 - e * e))
    return 1.0 / (9.0 * n ** (1.0 / 3.0)), base / q, base * e * e


def G_t_from_metric(phi) -> np.ndarray:
    """G_t recovered from the (n, e) metric in the twisted coordinate.

    With r = (2/5) n^(5/6) the coefficient of dphi^2 is r^2 / c_t^2 (= n^(5/3)),
    and G_t is the ratio of the omega coefficient to it.
    """
    phi = np.asarray(phi, dtype=float)
    e = e_tangential(phi)
    q = np.sqrt(1.0 - e * e)
    return (1.0 + q) * e * e / (4.0 * (1.0 - e * e))


def tangential_phi_coefficient(phi, h: float = 1e-6) -> np.ndarray:
    """g_ee (de/dphi)^2 / n^(5/3); equals 1 when the normal form holds."""
    phi = np.asarray(phi, dtype=float)
    e = e_tangential(phi)
    de = (e_tangential(phi + h) - e_tangential(phi - h)) / (2.0 * h)
    q = np.sqrt(1.0 - e * e)
    return (1.0 + q) / (4.0 * (1.0 - e * e) * q) * de * de
