"""Invariant suite behind ``avgtransfer validate``.

Items: 1 equilibrium values, 2 saddle linearisation, 3 symmetries,
4 ordering of S, Z_b, U and the sign of a on Z_b, 5 conservation of
rho H n^(-1/3) along arcs.  ``sign_a = -1`` flips a inside the kernels
and must make item 4 fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .field import SQRT10, fd_jacobian, find_Zb
from .flow import FlowConfig, StopCondition, integrate, trace_manifolds
from .hamiltonian import DEFAULT_TOL, HALF_PI, ControlMode

MODES = (ControlMode.FULL, ControlMode.TANGENTIAL)


@dataclass
class Check:
    item: int
    name: str
    mode: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} item {self.item} [{self.mode}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


@dataclass
class Report:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_items(self) -> list[int]:
        return sorted({c.item for c in self.checks if not c.passed})

    def to_dict(self) -> dict:
        return {"schema": 1, "passed": self.passed,
                "checks": [{"item": c.item, "name": c.name, "mode": c.mode, "passed": c.passed,
                            "detail": c.detail, "seconds": round(c.seconds, 3)}
                           for c in self.checks]}


def _field(mode, psi, phi, tol, sign_a):
    a, b, c, _, _, st = K.field(mode.code, psi, phi, tol)
    return sign_a * a, b, c, st


def check_equilibria(mode, tol=DEFAULT_TOL, sign_a=1.0):
    H0 = K.density(mode.code, 0.0, 0.0, tol)[0]
    c0 = _field(mode, 0.0, 0.0, tol, sign_a)[2]
    cp = _field(mode, math.pi, 0.0, tol, sign_a)[2]
    dev = max(abs(H0 - 1.0), abs(c0 - 1.0), abs(cp + 1.0))
    return dev < 1e-8, f"max deviation {dev:.2e}"


def check_saddle(mode, sign_a=1.0):
    J = fd_jacobian(mode)
    J[0] *= sign_a
    if mode is ControlMode.FULL:
        ref = np.array([[-2.0, 0.5], [0.5, 1.0]])
        eig_ref = np.array([-(SQRT10 + 1.0) / 2.0, (SQRT10 - 1.0) / 2.0])
    else:
        ref = np.array([[-2.0, 0.5], [0.0, 1.0]])
        eig_ref = np.array([-2.0, 1.0])
    eig = np.sort(np.linalg.eigvals(J).real)
    dj = float(np.max(np.abs(J - ref)))
    de = float(np.max(np.abs(eig - eig_ref)))
    return dj < 1e-3 and de < 1e-3, f"jacobian dev {dj:.2e}, eigenvalue dev {de:.2e}"


def check_symmetries(mode, n_points=1000, seed=0, tol=DEFAULT_TOL, sign_a=1.0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        psi = rng.uniform(-math.pi, math.pi)
        phi = rng.uniform(-1.5, 1.5)
        a, b, c, _ = _field(mode, psi, phi, tol, sign_a)
        ap, bp, cp, _ = _field(mode, psi + math.pi, phi, tol, sign_a)
        am, bm, cm, _ = _field(mode, -psi, -phi, tol, sign_a)
        H = K.density(mode.code, psi, phi, tol)[0]
        Hp = K.density(mode.code, psi + math.pi, phi, tol)[0]
        Hm = K.density(mode.code, -psi, -phi, tol)[0]
        worst = max(worst, abs(ap + a), abs(bp + b), abs(cp + c), abs(am + a), abs(bm + b),
                    abs(cm - c), abs(Hp - H), abs(Hm - H))
    return worst < 1e-8, f"{n_points} points, worst {worst:.2e}"


def check_ordering(mode, quick=False, tol=DEFAULT_TOL, sign_a=1.0):
    m = trace_manifolds(mode, tol)
    grid = np.round(np.arange(0.05, 1.5001, 0.05), 10)
    if quick:
        grid = grid[::4]
    bad = []
    min_a = math.inf
    for phi in grid:
        s, u = m.S0(phi), m.U0(phi)
        z = find_Zb(float(phi), mode, tol)
        a = _field(mode, z, float(phi), tol, sign_a)[0]
        min_a = min(min_a, a)
        if not (s < z < 0.0 < u) or not a > 0.0:
            bad.append(float(phi))
    detail = f"{len(grid)} phi values, min a(Z_b) {min_a:.3e}"
    ok = not bad
    if mode is ControlMode.TANGENTIAL:
        z0 = find_Zb(1e-7, mode, tol)
        dz = abs(z0 + math.atan(0.5))
        ok = ok and dz < 1e-3
        detail += f", |Z_b(0+) + arctan(1/2)| {dz:.1e}"
    if bad:
        detail += f", violated at phi {bad[:5]}"
    return ok, detail


def check_conservation(mode, n_arcs=20, length=10.0, seed=1, tol=DEFAULT_TOL, sign_a=1.0):
    rng = np.random.default_rng(seed)
    cfg = FlowConfig(quad_tol=tol, sign_a=sign_a)
    worst = 0.0
    for _ in range(n_arcs):
        psi = rng.uniform(-math.pi, math.pi)
        phi = rng.uniform(-1.2, 1.2)
        n0 = math.exp(rng.uniform(-1.0, 1.0))
        direction = 1.0 if rng.random() < 0.5 else -1.0
        tr = integrate((psi, phi), n0=n0, mode=mode,
                       stop=StopCondition(tau_max=direction * length), tol=tol, config=cfg)
        worst = max(worst, tr.hamiltonian_drift())
    return worst < 1e-6, f"{n_arcs} arcs, worst relative drift {worst:.2e}"


def run_suite(modes=MODES, quick=False, sign_a=1.0, tol=DEFAULT_TOL, seed=0,
              echo=None) -> Report:
    rep = Report()
    for mode in (ControlMode.parse(m) for m in modes):
        jobs = [
            (1, "equilibria", lambda: check_equilibria(mode, tol, sign_a)),
            (2, "saddle", lambda: check_saddle(mode, sign_a)),
            (3, "symmetries", lambda: check_symmetries(mode, 250 if quick else 1000, seed, tol,
                                                       sign_a)),
            (4, "ordering", lambda: check_ordering(mode, quick, tol, sign_a)),
            (5, "conservation", lambda: check_conservation(mode, 5 if quick else 20, 10.0,
                                                           seed + 1, tol, sign_a)),
        ]
        for item, name, fn in jobs:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a failed check, not a crash
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            chk = Check(item, name, mode.value, bool(ok), detail, time.perf_counter() - t0)
            rep.checks.append(chk)
            if echo:
                echo(chk.line())
    return rep


__all__ = ["Check", "Report", "run_suite", "HALF_PI"]
