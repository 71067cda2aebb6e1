"""Reduced extremal flow on the cylinder and the invariant manifolds.

The reduced system is d(psi)/d(tau) = a, d(phi)/d(tau) = b, augmented with

* lam = int c d(tau), so that n = n0 * exp(3 lam);
* the physical time, dt/d(tau) = n^(1/3);
* log rho, with d(log rho)/d(tau) = H cos(psi) - H_phi sin(psi).

rho is integrated rather than taken from the conservation law
rho * H * n^(-1/3) = const, so that the law can serve as a check.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _kernels as K
from . import _ode
from .errors import EscapeDomain, GraphViolation, QuadratureNonConvergence, StepFailure
from .field import saddle
from .hamiltonian import DEFAULT_TOL, HALF_PI, ControlMode, CylinderPoint, _coerce, wrap

PHI_EDGE = 1e-6
MANIFOLD_EDGE = 1e-3
SEED_DELTA = 1e-4
CSV_HEADER = ("tau", "psi", "phi", "n", "rho", "t_phys")


@dataclass(frozen=True)
class FlowConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 0.05
    quad_tol: float = DEFAULT_TOL
    fixed_step: bool = False
    max_steps: int = 2_000_000
    # multiplies a; only the validation mutation check changes it
    sign_a: float = 1.0


@dataclass(frozen=True)
class StopCondition:
    """When to stop: after |tau_max| (sign gives the direction), at the
    boundary |phi| = pi/2 - phi_margin, or when ``target_index`` of the state
    (1 = phi, 2 = lam) crosses ``target`` in ``direction`` (+1/-1/0)."""

    tau_max: float = 50.0
    target: Optional[float] = None
    target_index: int = 1
    direction: int = 1
    phi_margin: float = PHI_EDGE

    @classmethod
    def at_phi(cls, phi, tau_max=200.0, direction=1):
        return cls(tau_max=tau_max, target=phi, target_index=1, direction=direction)

    @classmethod
    def at_lam(cls, lam, tau_max=200.0, direction=0):
        return cls(tau_max=tau_max, target=lam, target_index=2, direction=direction)


@dataclass(frozen=True)
class FlowSample:
    tau: float
    psi: float
    phi: float
    n: float
    rho: float
    t_phys: float


_REASONS = {
    _ode.DONE_TAU: "tau",
    _ode.DONE_TARGET: "target",
    _ode.DONE_BOUNDARY: "boundary",
}


@dataclass
class Trajectory:
    tau: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    lam: np.ndarray
    t_phys: np.ndarray
    log_rho: np.ndarray
    n0: float
    rho0: float
    mode: ControlMode
    reason: str
    quad_tol: float = DEFAULT_TOL

    @property
    def n(self) -> np.ndarray:
        return self.n0 * np.exp(3.0 * self.lam)

    @property
    def rho(self) -> np.ndarray:
        return self.rho0 * np.exp(self.log_rho)

    def __len__(self):
        return len(self.tau)

    def __getitem__(self, i) -> FlowSample:
        return FlowSample(float(self.tau[i]), float(self.psi[i]), float(self.phi[i]),
                          float(self.n0 * math.exp(3.0 * self.lam[i])),
                          float(self.rho0 * math.exp(self.log_rho[i])), float(self.t_phys[i]))

    def samples(self) -> list[FlowSample]:
        return [self[i] for i in range(len(self))]

    @property
    def final(self) -> FlowSample:
        return self[len(self) - 1]

    def require_target(self) -> "Trajectory":
        if self.reason != "target":
            raise EscapeDomain(f"target not reached (stopped on {self.reason})")
        return self

    def densities(self) -> np.ndarray:
        code = self.mode.code
        return np.array([K.density(code, p, f, self.quad_tol)[0]
                         for p, f in zip(self.psi, self.phi)])

    def hamiltonian(self) -> np.ndarray:
        """rho * H * n^(-1/3) along the arc (a first integral)."""
        return self.rho * self.densities() * self.n ** (-1.0 / 3.0)

    def hamiltonian_drift(self) -> float:
        h = self.hamiltonian()
        return float(np.max(np.abs(h / h[0] - 1.0)))

    def closed_form_time(self) -> np.ndarray:
        """[n^(1/3) cos(psi) / H] from 0 to tau, to compare with t_phys."""
        q = self.n ** (1.0 / 3.0) * np.cos(self.psi) / self.densities()
        return q - q[0]

    def time_residual(self) -> float:
        return float(np.max(np.abs(self.closed_form_time() - self.t_phys)))

    def to_csv(self, path) -> None:
        write_csv(path, self.samples())


def write_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in samples:
            w.writerow([f"{s.tau:.17g}", f"{s.psi:.17g}", f"{s.phi:.17g}",
                        f"{s.n:.17g}", f"{s.rho:.17g}", f"{s.t_phys:.17g}"])


def integrate(start, n0: float = 1.0, rho0: float = 1.0,
              mode: ControlMode = ControlMode.FULL,
              stop: StopCondition = StopCondition(),
              tol: float = DEFAULT_TOL, config: Optional[FlowConfig] = None,
              record: bool = True, pin_phi: bool = False,
              lam0: float = 0.0) -> Trajectory:
    """Integrate the augmented flow from ``start``.

    ``pin_phi`` freezes phi (used to follow a segment of phi = 0 on which
    b vanishes identically).  Raises StepFailure or
    QuadratureNonConvergence; reaching the phi boundary is reported through
    ``Trajectory.reason``.
    """
    p = _coerce(start)
    mode = ControlMode.parse(mode)
    cfg = config or FlowConfig(quad_tol=tol)
    if not (n0 > 0.0 and rho0 > 0.0):
        raise ValueError("n0 and rho0 must be positive")
    y0 = np.array([p.psi, p.phi, lam0, 0.0, 0.0])
    t_idx = -1 if stop.target is None else int(stop.target_index)
    t_val = 0.0 if stop.target is None else float(stop.target)
    taus, ys, nrec, code, tf, yf = _ode.integrate_core(
        y0, float(stop.tau_max), mode.code, float(tol), float(n0) ** (1.0 / 3.0),
        float(cfg.sign_a), bool(pin_phi), float(cfg.rtol), float(cfg.atol),
        float(cfg.max_step), bool(cfg.fixed_step), t_idx, t_val, int(stop.direction),
        HALF_PI - stop.phi_margin, bool(record), int(cfg.max_steps))
    if code == _ode.FAIL_QUAD:
        raise QuadratureNonConvergence(f"quadrature failed along the arc from {p}")
    if code in (_ode.FAIL_STEP, _ode.FAIL_MAXSTEPS):
        raise StepFailure(f"integrator failed from {p} (code {code})")
    if record:
        taus = taus[:nrec].copy()
        ys = ys[:nrec].copy()
    else:
        taus = np.array([0.0, tf])
        ys = np.vstack([y0, yf])
    return Trajectory(taus, ys[:, 0], ys[:, 1], ys[:, 2], ys[:, 3], ys[:, 4],
                      float(n0), float(rho0), mode, _REASONS[code], tol)


# ---------------------------------------------------------------- manifolds

@dataclass
class ManifoldBranch:
    """Graph psi = f(phi) over 0 < phi < pi/2 - 1e-3 of one manifold branch.

    ``name`` is one of S0, U0 (traced) or Spi, Upi (images under psi -> psi+pi).
    Negative phi is handled by the odd extension, see :class:`Manifolds`.
    """

    name: str
    mode: ControlMode
    phi: np.ndarray
    psi: np.ndarray
    slope: np.ndarray
    delta: float
    _spline: object = dc_field(default=None, repr=False)

    def __post_init__(self):
        self._spline = CubicHermiteSpline(self.phi, self.psi, self.slope)

    @property
    def phi_max(self) -> float:
        return float(self.phi[-1])

    def __call__(self, phi):
        return self._spline(phi)

    def shifted(self, name: str) -> "ManifoldBranch":
        return ManifoldBranch(name, self.mode, self.phi, self.psi + math.pi, self.slope,
                              self.delta)

    def resample(self, num: int = 400) -> tuple[np.ndarray, np.ndarray]:
        g = np.linspace(self.phi[0], self.phi[-1], num)
        return g, self(g)


class Region(enum.Enum):
    F = "F"
    F_PLUS = "F+"
    F_SHARP = "F#"
    F_SHARP_PLUS = "F#+"
    E = "E"
    E_PLUS = "E+"
    ON_MANIFOLD = "OnManifold"


def _seed_trajectory(mode: ControlMode, which: str, delta: float, tol: float,
                     target_phi: Optional[float] = None, record: bool = True) -> Trajectory:
    sd = saddle(mode, verify=False)
    if which == "U0":
        v = sd.eig_unstable[1] / np.linalg.norm(sd.eig_unstable[1])
        start = (delta * v[0], delta * v[1])
        tau = 200.0
    else:
        if sd.sigma_bar > 0.0:
            # the stable branch reaches phi = 0 at the end of the segment
            start = (-sd.sigma_bar, 0.0)
        else:
            v = sd.eig_stable[1] / np.linalg.norm(sd.eig_stable[1])
            if v[1] < 0.0:
                v = -v
            start = (delta * v[0], delta * v[1])
        tau = -200.0
    if target_phi is None:
        stop = StopCondition(tau_max=tau, phi_margin=MANIFOLD_EDGE)
    else:
        stop = StopCondition(tau_max=tau, target=target_phi, target_index=1, direction=1,
                             phi_margin=MANIFOLD_EDGE / 10)
    return integrate(start, mode=mode, stop=stop, tol=tol, record=record)


def _branch_from(traj: Trajectory, name: str, mode: ControlMode, delta: float,
                 tol: float) -> ManifoldBranch:
    if traj.reason != "boundary":
        raise StepFailure(f"{name} branch did not reach the phi boundary ({traj.reason})")
    phi = traj.phi.copy()
    psi = traj.psi.copy()
    d = np.diff(phi)
    if np.any(d < -1e-14):
        i = int(np.argmax(d < -1e-14))
        raise GraphViolation(f"{name}: phi not monotone near phi={phi[i]:.6f}")
    keep = np.concatenate([[True], d > 0.0])
    phi, psi = phi[keep], psi[keep]
    code = mode.code
    ab = np.array([K.field(code, p, f, tol)[:2] for p, f in zip(psi, phi)])
    ok = np.abs(ab[:, 1]) > 1e-9
    phi, psi, ab = phi[ok], psi[ok], ab[ok]
    slope = ab[:, 0] / ab[:, 1]
    # prepend the equilibrium (or the segment end) so the graph reaches phi = 0
    sd = saddle(mode, verify=False)
    if name == "U0":
        anchor, s0 = 0.0, sd.eig_unstable[1][0] / sd.eig_unstable[1][1]
    elif sd.sigma_bar > 0.0:
        anchor, s0 = -sd.sigma_bar, None
    else:
        anchor, s0 = 0.0, sd.eig_stable[1][0] / sd.eig_stable[1][1]
    if phi[0] > 0.0 and s0 is not None:
        phi = np.concatenate([[0.0], phi])
        psi = np.concatenate([[anchor], psi])
        slope = np.concatenate([[s0], slope])
    return ManifoldBranch(name, mode, phi, psi, slope, delta)


class Manifolds:
    """Stable/unstable manifolds of (0, 0) and (pi, 0) for one control mode.

    S0, U0 are graphs over phi in (-pi/2, pi/2) (odd in phi); Spi = pi + U0
    and Upi = pi + S0.  Exact values at a given phi come from re-integrating
    the branch with an event (``exact``); the Hermite graphs serve
    classification and plotting.
    """

    def __init__(self, mode: ControlMode, S0: ManifoldBranch, U0: ManifoldBranch,
                 tol: float, delta: float):
        self.mode = mode
        self.S0b = S0
        self.U0b = U0
        self.tol = tol
        self.delta = delta
        self.sigma_bar = saddle(mode, verify=False).sigma_bar
        self._exact_cache: dict = {}

    @property
    def branches(self) -> list[ManifoldBranch]:
        return [self.S0b, self.U0b, self.U0b.shifted("Spi"), self.S0b.shifted("Upi")]

    def _odd(self, br: ManifoldBranch, phi: float, at_zero: float) -> float:
        if phi > 0.0:
            return float(br(min(phi, br.phi_max)))
        if phi < 0.0:
            return -float(br(min(-phi, br.phi_max)))
        return at_zero

    def S0(self, phi: float) -> float:
        # the one-sided limit at phi = 0 is -sigma_bar from above, +sigma_bar from below
        return self._odd(self.S0b, phi, -self.sigma_bar)

    def U0(self, phi: float) -> float:
        return self._odd(self.U0b, phi, 0.0)

    def Spi(self, phi: float) -> float:
        return math.pi + self.U0(phi)

    def Upi(self, phi: float) -> float:
        return math.pi + self.S0(phi)

    def exact(self, which: str, phi: float) -> float:
        """Branch value at ``phi`` by integrating from the seed to phi."""
        if which in ("Spi", "Upi"):
            return math.pi + self.exact("U0" if which == "Spi" else "S0", phi)
        if phi == 0.0:
            return self.S0(0.0) if which == "S0" else 0.0
        key = (which, abs(phi))
        if key not in self._exact_cache:
            tr = _seed_trajectory(self.mode, which, self.delta, self.tol,
                                  target_phi=abs(phi), record=False)
            if tr.reason != "target":
                raise EscapeDomain(f"{which} did not reach phi={abs(phi)}")
            self._exact_cache[key] = float(tr.psi[-1])
        v = self._exact_cache[key]
        return v if phi > 0.0 else -v

    def classify(self, point, eps: float = 1e-6) -> Region:
        return classify(point, self, eps)


def trace_manifolds(mode: ControlMode = ControlMode.FULL, tol: float = DEFAULT_TOL,
                    delta: float = SEED_DELTA, self_check: bool = True) -> Manifolds:
    """Trace S0 and U0 from the saddle at (0, 0).

    With ``self_check`` the branches are re-traced with delta/10 and must
    agree to 1e-5 on a common phi grid.
    """
    mode = ControlMode.parse(mode)
    m = _trace(mode, tol, delta)
    if self_check:
        m2 = _trace(mode, tol, delta / 10.0)
        for b1, b2 in ((m.S0b, m2.S0b), (m.U0b, m2.U0b)):
            lo = max(b1.phi[1], b2.phi[1])
            hi = min(b1.phi_max, b2.phi_max)
            g = np.linspace(lo, hi, 200)
            dev = float(np.max(np.abs(b1(g) - b2(g))))
            if dev > 1e-5:
                raise GraphViolation(f"{b1.name}: seed-offset sensitivity {dev:.2e}")
    return m


@lru_cache(maxsize=8)
def _trace(mode: ControlMode, tol: float, delta: float) -> Manifolds:
    s = _branch_from(_seed_trajectory(mode, "S0", delta, tol), "S0", mode, delta, tol)
    u = _branch_from(_seed_trajectory(mode, "U0", delta, tol), "U0", mode, delta, tol)
    return Manifolds(mode, s, u, tol, delta)


def classify(point, manifolds: Manifolds, eps: float = 1e-6) -> Region:
    """Which of the six invariant regions contains ``point``."""
    p = _coerce(point)
    phi = p.phi
    m = manifolds
    if phi == 0.0:
        sb = m.sigma_bar
        x = wrap(p.psi)
        for c in (0.0, math.pi):
            if abs(wrap(x - c)) <= sb + eps:
                return Region.ON_MANIFOLD
        return Region.E if 0.0 < x < math.pi else Region.E_PLUS
    if phi > 0.0:
        base = m.S0(phi)
        cuts = [base, m.U0(phi), m.Upi(phi), m.Spi(phi), base + 2.0 * math.pi]
        names = [Region.F, Region.E, Region.F_PLUS, Region.E_PLUS]
    else:
        base = m.U0(phi)
        cuts = [base, m.S0(phi), m.Spi(phi), m.Upi(phi), base + 2.0 * math.pi]
        names = [Region.F_SHARP, Region.E, Region.F_SHARP_PLUS, Region.E_PLUS]
    x = base + ((p.psi - base) % (2.0 * math.pi))
    for c in cuts:
        if abs(x - c) <= eps:
            return Region.ON_MANIFOLD
    for lo, hi, name in zip(cuts[:-1], cuts[1:], names):
        if lo < x < hi:
            return name
    return Region.ON_MANIFOLD
