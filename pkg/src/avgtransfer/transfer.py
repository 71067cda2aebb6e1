"""Shooting solver for the averaged minimum-time transfer between two orbits.

An extremal is sought from (n0, e0) to (n1, e1).  On the cylinder the
problem reads: start on the line phi = phi0 at psi = chi, flow until phi
first reaches phi1 (upwards), and match the accumulated

    Lambda(chi) = int_0^tau_f c dtau

to lam_bar = (1/3) ln(n1/n0).  The problem is first brought to the ordering
phi0 <= phi1, phi1 >= 0 with the two flow symmetries

* sharp: (psi, phi) -> (-psi, -phi), which keeps time and Lambda;
* plus: (psi, phi) -> (psi + pi, phi) with time reversed, which swaps the
  endpoints and changes the sign of Lambda.

then dispatched to one of five cases:

====  =========================  ==================================
case  canonical endpoints        construction
====  =========================  ==================================
a     phi0 <= 0 < phi1, or       root of Lambda on (S0, Spi)
      phi0 < 0 = phi1, sigma=0
b     phi0 < 0 = phi1, sigma>0   root, or stable arc plus dwell on
                                 the segment of the phi = 0 line
c     phi0 = phi1 = 0            rest at (0, 0) or (pi, 0)
d     0 < phi0 < phi1            root of Lambda on (S0, Spi)
e     0 < phi0 = phi1            root, Lambda = 0 for Z_b0 <= chi <= Z_bpi
====  =========================  ==================================
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional

import numpy as np
from scipy import optimize

from . import _kernels as K
from .errors import BracketNotFound, Capped, DomainError, EscapeDomain
from .field import find_Zb, saddle
from .flow import FlowConfig, StopCondition, Trajectory, _seed_trajectory, integrate, trace_manifolds
from .hamiltonian import DEFAULT_TOL, HALF_PI, ControlMode

SCHEMA = 1
TAU_CAP = 200.0
N_SAMPLES = 64
INSET = 1e-5
MIN_INSET = 1e-14
# stand-in for Lambda = +-inf in the bracket search
_BIG = 1e6


@dataclass(frozen=True)
class TransferProblem:
    n0: float
    n1: float
    e0: float
    e1: float
    mode: ControlMode = ControlMode.FULL

    def __post_init__(self):
        object.__setattr__(self, "mode", ControlMode.parse(self.mode))
        for name in ("n0", "n1", "e0", "e1"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not (self.n0 > 0.0 and self.n1 > 0.0):
            raise DomainError("n0 and n1 must be positive")
        if not (abs(self.e0) < 1.0 and abs(self.e1) < 1.0):
            raise DomainError("|e0| and |e1| must be < 1")

    @property
    def phi0(self) -> float:
        return math.asin(self.e0)

    @property
    def phi1(self) -> float:
        return math.asin(self.e1)

    @property
    def lam_bar(self) -> float:
        return math.log(self.n1 / self.n0) / 3.0

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "n0": self.n0, "n1": self.n1, "e0": self.e0,
                "e1": self.e1, "mode": self.mode.value}

    @classmethod
    def from_dict(cls, d: dict) -> "TransferProblem":
        if not isinstance(d, dict):
            raise DomainError("problem must be a JSON object")
        if d.get("schema", SCHEMA) != SCHEMA:
            raise DomainError(f"unsupported schema {d.get('schema')!r}")
        try:
            return cls(float(d["n0"]), float(d["n1"]), float(d["e0"]), float(d["e1"]),
                       d.get("mode", "full"))
        except KeyError as exc:
            raise DomainError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise DomainError(f"bad problem field: {exc}") from None


@dataclass(frozen=True)
class Recipe:
    """How the canonical problem was obtained: sharp first, then plus."""

    sharp: bool = False
    plus: bool = False

    @property
    def identity(self) -> bool:
        return not (self.sharp or self.plus)


def normalize(problem: TransferProblem) -> tuple[TransferProblem, Recipe]:
    """Map ``problem`` to phi0 <= phi1, phi1 >= 0 with the flow symmetries."""
    p = problem
    sharp = plus = False
    if p.e0 <= p.e1:
        if p.e1 < 0.0:
            sharp = plus = True
    elif p.e0 >= 0.0:
        plus = True
    else:
        sharp = True
    if sharp:
        p = replace(p, e0=-p.e0, e1=-p.e1)
    if plus:
        p = replace(p, n0=p.n1, n1=p.n0, e0=p.e1, e1=p.e0)
    return p, Recipe(sharp, plus)


def case_of(problem: TransferProblem) -> str:
    """Case letter of a canonical problem."""
    f0, f1 = problem.phi0, problem.phi1
    if not (f0 <= f1 and f1 >= 0.0):
        raise DomainError("problem is not canonical; call normalize first")
    if f1 == 0.0:
        if f0 == 0.0:
            return "c"
        return "b" if saddle(problem.mode, verify=False).sigma_bar > 0.0 else "a"
    if f0 <= 0.0:
        return "a"
    return "e" if f0 == f1 else "d"


@dataclass
class TransferConfig:
    tol: float = DEFAULT_TOL
    tau_cap: float = TAU_CAP
    n_samples: int = N_SAMPLES
    inset: float = INSET
    flow: FlowConfig = dc_field(default_factory=FlowConfig)


def _config(tol, config):
    cfg = config or TransferConfig(tol=tol)
    return cfg, replace(cfg.flow, quad_tol=cfg.tol)


def Lambda(chi: float, problem: TransferProblem, tol: float = DEFAULT_TOL,
           config: Optional[TransferConfig] = None) -> tuple[float, float]:
    """(Lambda(chi), tau_f) for a canonical problem.

    Raises Capped when phi1 is not reached within the tau cap; the caller
    reads the sign of ``c_end`` as the sign of the infinite limit.
    """
    cfg, fcfg = _config(tol, config)
    phi0, phi1 = problem.phi0, problem.phi1
    code = problem.mode.code
    if phi0 == phi1:
        b = K.field(code, chi, phi0, cfg.tol)[1]
        if b >= 0.0:
            return 0.0, 0.0
    tr = integrate((chi, phi0), mode=problem.mode,
                   stop=StopCondition.at_phi(phi1, tau_max=cfg.tau_cap, direction=1),
                   tol=cfg.tol, config=fcfg, record=False)
    return _lambda_from(tr, cfg)


def _lambda_from(tr: Trajectory, cfg: TransferConfig) -> tuple[float, float]:
    if tr.reason == "target":
        return float(tr.lam[-1]), float(tr.tau[-1])
    if tr.reason == "tau":
        c_end = K.field(tr.mode.code, tr.psi[-1], tr.phi[-1], cfg.tol)[2]
        raise Capped(cfg.tau_cap, c_end, float(tr.lam[-1]))
    raise EscapeDomain(f"arc from psi={tr.psi[0]:.6f} left the domain before phi1")


def chi_interval(problem: TransferProblem, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Open shooting interval for a canonical problem of case a, b, d or e."""
    mode = problem.mode
    phi0 = problem.phi0
    if phi0 == 0.0:
        return saddle(mode, verify=False).sigma_bar, math.pi
    m = trace_manifolds(mode, tol, self_check=False)
    return m.exact("S0", phi0), m.exact("Spi", phi0)


@dataclass
class TransferSolution:
    problem: TransferProblem
    chi: float
    tau_f: float
    case_tag: str
    trajectory: Trajectory
    endpoint_residuals: tuple[float, float, float]
    lam_range: Optional[tuple[float, float]] = None

    @property
    def samples(self):
        return self.trajectory.samples()

    def to_dict(self) -> dict:
        dphi, dlam, dn = self.endpoint_residuals
        return {
            "schema": SCHEMA,
            "problem": self.problem.to_dict(),
            "chi": self.chi,
            "tau_f": self.tau_f,
            "case": self.case_tag.upper(),
            "lam_bar": self.problem.lam_bar,
            "t_final": float(self.trajectory.t_phys[-1]),
            "endpoint_residuals": {"dphi": dphi, "dlambda": dlam, "dn_rel": dn},
            "n_samples": len(self.trajectory),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def residuals(problem: TransferProblem, tr: Trajectory) -> tuple[float, float, float]:
    """(|dphi|, |dLambda|, |dn/n|), each the worse of the two ends."""
    dphi = max(abs(tr.phi[0] - problem.phi0), abs(tr.phi[-1] - problem.phi1))
    dlam = abs(tr.lam[-1] - tr.lam[0] - problem.lam_bar)
    n = tr.n
    dn = max(abs(n[0] / problem.n0 - 1.0), abs(n[-1] / problem.n1 - 1.0))
    return float(dphi), float(dlam), float(dn)


def _scan(g, lo, hi, n, inset):
    xs = np.linspace(lo + inset, hi - inset, n)
    return list(xs), [g(x) for x in xs]


def _first_sign_change(xs, gs):
    for i in range(len(xs) - 1):
        if gs[i] == 0.0:
            return xs[i], xs[i]
        if gs[i] * gs[i + 1] < 0.0:
            return xs[i], xs[i + 1]
    if gs and gs[-1] == 0.0:
        return xs[-1], xs[-1]
    return None


def _root(problem: TransferProblem, lo: float, hi: float, cfg: TransferConfig) -> float:
    target = problem.lam_bar
    seen = []

    def g(chi):
        try:
            lam, _ = Lambda(chi, problem, cfg.tol, cfg)
        except Capped as exc:
            lam = math.copysign(_BIG, exc.c_end)
        seen.append(lam)
        return lam - target

    xs, gs = _scan(g, lo, hi, cfg.n_samples, cfg.inset)
    br = _first_sign_change(xs, gs)
    inset = cfg.inset
    while br is None and inset > MIN_INSET:
        # Lambda has infinite limits at the interval ends: look closer
        inset /= 10.0
        for x in (lo + inset, hi - inset):
            xs.append(x)
            gs.append(g(x))
        order = np.argsort(xs)
        xs = [xs[i] for i in order]
        gs = [gs[i] for i in order]
        br = _first_sign_change(xs, gs)
    if br is None:
        rng = (float(min(seen)), float(max(seen)))
        raise BracketNotFound(f"no sign change of Lambda - {target:.6g}; Lambda range {rng}",
                              rng)
    a, b = br
    if a == b:
        return a
    return optimize.brentq(g, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def _arc(problem, chi, cfg, fcfg) -> Trajectory:
    phi0, phi1 = problem.phi0, problem.phi1
    if phi0 == phi1 and K.field(problem.mode.code, chi, phi0, cfg.tol)[1] >= 0.0:
        return _constant(problem, chi, phi0, 0.0)
    tr = integrate((chi, phi0), n0=problem.n0, mode=problem.mode,
                   stop=StopCondition.at_phi(phi1, tau_max=cfg.tau_cap, direction=1),
                   tol=cfg.tol, config=fcfg)
    _lambda_from(tr, cfg)
    return tr


def _constant(problem, psi, phi, tau_f, num=2) -> Trajectory:
    """Rest point (psi, 0) with c = cos(psi) = +-1, or a zero-length arc."""
    tau = np.linspace(0.0, tau_f, num) if tau_f > 0.0 else np.zeros(1)
    c = math.cos(psi) if tau_f > 0.0 else 0.0
    lam = c * tau
    n0c = problem.n0 ** (1.0 / 3.0)
    # dt/dtau = n0^(1/3) exp(c tau), d(log rho)/dtau = H cos(psi) = c
    t = n0c * tau if c == 0.0 else n0c * np.expm1(c * tau) / c
    return Trajectory(tau, np.full_like(tau, psi), np.full_like(tau, phi), lam, t, lam.copy(),
                      problem.n0, 1.0, problem.mode, "tau", DEFAULT_TOL)


def _concat(a: Trajectory, b: Trajectory) -> Trajectory:
    cat = np.concatenate
    return Trajectory(cat([a.tau, a.tau[-1] + b.tau[1:]]), cat([a.psi, b.psi[1:]]),
                      cat([a.phi, b.phi[1:]]), cat([a.lam, b.lam[1:]]),
                      cat([a.t_phys, a.t_phys[-1] + b.t_phys[1:]]),
                      cat([a.log_rho, a.log_rho[-1] + b.log_rho[1:]]),
                      a.n0, a.rho0, a.mode, b.reason, a.quad_tol)


def _solve_b(problem, cfg, fcfg):
    m = trace_manifolds(problem.mode, cfg.tol, self_check=False)
    back = _seed_trajectory(problem.mode, "S0", m.delta, cfg.tol, target_phi=-problem.phi0)
    if back.reason != "target":
        raise EscapeDomain("stable branch did not reach phi0")
    lam_S0 = -float(back.lam[-1])
    if problem.lam_bar < lam_S0:
        lo, hi = chi_interval(problem, cfg.tol)
        chi = _root(problem, lo, hi, cfg)
        return chi, _arc(problem, chi, cfg, fcfg), (None, lam_S0)
    # sharp image of the backward trace, run forward in time; the trace was
    # run with n0 = 1, so physical time picks up n0^(1/3) exp(-lam_end)
    tau = back.tau[::-1] - back.tau[-1]
    lam = back.lam[::-1] - back.lam[-1]
    scale = problem.n0 ** (1.0 / 3.0) * math.exp(-back.lam[-1])
    t = scale * (back.t_phys[::-1] - back.t_phys[-1])
    lr = back.log_rho[::-1] - back.log_rho[-1]
    first = Trajectory(tau, -back.psi[::-1], -back.phi[::-1], lam, t, lr,
                       problem.n0, 1.0, problem.mode, "target", cfg.tol)
    if problem.lam_bar == lam_S0:
        return float(first.psi[0]), first, (lam_S0, None)
    sigma = saddle(problem.mode, verify=False).sigma_bar
    dwell = integrate((sigma, 0.0), n0=float(first.n[-1]), mode=problem.mode,
                      stop=StopCondition.at_lam(problem.lam_bar - lam_S0,
                                                tau_max=cfg.tau_cap, direction=1),
                      tol=cfg.tol, config=fcfg, pin_phi=True)
    if dwell.reason != "target":
        raise Capped(cfg.tau_cap, 1.0, float(dwell.lam[-1]) + lam_S0)
    dwell.lam = dwell.lam + lam_S0
    return float(first.psi[0]), _concat(first, dwell), (lam_S0, None)


def _unmap(sol_tr: Trajectory, recipe: Recipe, original: TransferProblem) -> Trajectory:
    tr = sol_tr
    if recipe.plus:
        tau_f = tr.tau[-1]
        tr = Trajectory(tau_f - tr.tau[::-1], tr.psi[::-1] + math.pi, tr.phi[::-1].copy(),
                        tr.lam[::-1] - tr.lam[-1], tr.t_phys[-1] - tr.t_phys[::-1],
                        tr.log_rho[::-1] - tr.log_rho[-1], 0.0, 1.0, tr.mode, tr.reason,
                        tr.quad_tol)
    if recipe.sharp:
        tr = Trajectory(tr.tau, -tr.psi, -tr.phi, tr.lam, tr.t_phys, tr.log_rho, 0.0, 1.0,
                        tr.mode, tr.reason, tr.quad_tol)
    tr.n0 = original.n0
    tr.rho0 = 1.0
    return tr


def solve(problem: TransferProblem, tol: float = DEFAULT_TOL,
          config: Optional[TransferConfig] = None) -> TransferSolution:
    """Extremal joining the two orbits of ``problem``.

    Raises BracketNotFound (with the Lambda range seen) when no sign change
    of Lambda - lam_bar is found, Capped when a dwell exceeds the tau cap.
    """
    cfg, fcfg = _config(tol, config)
    canon, recipe = normalize(problem)
    case = case_of(canon)
    lam_range = None
    if case == "c":
        lb = canon.lam_bar
        psi = 0.0 if lb >= 0.0 else math.pi
        tr = _constant(canon, psi, 0.0, abs(lb), num=max(2, int(abs(lb) / 0.05) + 1))
    elif case == "b":
        _, tr, lam_range = _solve_b(canon, cfg, fcfg)
    else:
        lo, hi = chi_interval(canon, cfg.tol)
        if case == "e" and canon.lam_bar == 0.0:
            # middle of the plateau [Z_b0, Z_bpi], where b > 0 and tau_f = 0
            chi = find_Zb(canon.phi0, canon.mode, cfg.tol) + HALF_PI
        else:
            chi = _root(canon, lo, hi, cfg)
        tr = _arc(canon, chi, cfg, fcfg)
    if not recipe.identity:
        tr = _unmap(tr, recipe, problem)
    res = residuals(problem, tr)
    return TransferSolution(problem, float(tr.psi[0]), float(tr.tau[-1]), case, tr, res,
                            lam_range)


def load_problem(path) -> TransferProblem:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed JSON: {exc}") from None
    return TransferProblem.from_dict(d)
