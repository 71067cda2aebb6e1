"""Command-line front end.

Exit codes: 0 ok, 1 numerical failure, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import energy, rawdyn, transfer
from .config import RunConfig, load_config
from .errors import AvgTransferError, DomainError, NumericalFailure
from .field import eval_field, find_Zb, saddle
from .flow import FlowConfig, StopCondition, integrate, trace_manifolds
from .hamiltonian import HALF_PI, ControlMode, eval_density
from .svg import PALETTE, Figure
from .validate import run_suite

SCHEMA = 1
PHI_LIM = HALF_PI - 1e-3


def _emit(obj, path=None):
    obj = {"schema": SCHEMA, **obj}
    text = json.dumps(obj, indent=2, sort_keys=False)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, str) else f"{x:.17g}" for x in r])


def _cfg(args) -> RunConfig:
    over = {"quad_tol": args.tol, "output_dir": args.out, "seed": args.seed,
            "mode": getattr(args, "mode", None)}
    return load_config(args.config, over)


# ---------------------------------------------------------------- eval

def cmd_eval(args):
    cfg = _cfg(args)
    mode = cfg.control_mode
    if not abs(args.phi) < HALF_PI:
        raise DomainError("phi must lie in (-pi/2, pi/2)")
    h = eval_density(mode, (args.psi, args.phi), cfg.quad_tol)
    f = eval_field((args.psi, args.phi), mode, cfg.quad_tol)
    key = "L" if mode is ControlMode.FULL else "M"
    _emit({"mode": mode.value, "psi": args.psi, "phi": args.phi, key: h.value,
           "d_psi": h.d_psi, "d_phi": h.d_phi, "region": str(h.region),
           "quad_error_estimate": h.quad_error_estimate, "a": f.a, "b": f.b, "c": f.c})
    return 0


# ---------------------------------------------------------------- manifolds / zb / portrait

def _manifold_rows(m):
    for br in m.branches:
        for sgn in (1.0, -1.0):
            phi, psi = br.resample(400)
            base = math.pi if br.name in ("Spi", "Upi") else 0.0
            if sgn < 0:
                # odd extension about the saddle the branch belongs to
                phi, psi = -phi, 2.0 * base - psi
            for p, q in zip(phi, psi):
                yield (br.name, float(p), float(q))


def _zb_rows(mode, num, tol):
    out = []
    for phi in np.linspace(0.0, PHI_LIM, num):
        z = find_Zb(float(phi), mode, tol)
        out.append((float(phi), z))
    return out


def _draw_manifolds(fig, m):
    colors = {"S0": PALETTE[0], "Upi": PALETTE[0], "U0": PALETTE[1], "Spi": PALETTE[1]}
    by = {}
    for name, phi, psi in _manifold_rows(m):
        by.setdefault(name, []).append((phi, psi))
    for name, pts in by.items():
        half = len(pts) // 2
        for seg in (pts[:half], pts[half:]):
            fig.polyline([p[1] for p in seg], [p[0] for p in seg], colors[name], 1.8)
            fig.polyline([p[1] - 2 * math.pi for p in seg], [p[0] for p in seg], colors[name], 1.8)
    if m.sigma_bar > 0.0:
        for c in (0.0, math.pi):
            fig.polyline([c - m.sigma_bar, c + m.sigma_bar], [0.0, 0.0], PALETTE[0], 1.8)


def cmd_manifolds(args):
    cfg = _cfg(args)
    mode = cfg.control_mode
    m = trace_manifolds(mode, cfg.quad_tol)
    out = cfg.out
    _write_rows(out / f"manifolds_{mode.value}.csv", ["branch", "phi", "psi"], _manifold_rows(m))
    sd = saddle(mode)
    fig = Figure((-HALF_PI, 1.5 * math.pi), (-HALF_PI, HALF_PI),
                 title=f"invariant manifolds ({mode.value})", xlabel="psi", ylabel="phi")
    _draw_manifolds(fig, m)
    fig.marker(0.0, 0.0, label="(0,0)")
    fig.marker(math.pi, 0.0, label="(pi,0)")
    fig.legend([("stable", PALETTE[0]), ("unstable", PALETTE[1])])
    fig.save(out / f"manifolds_{mode.value}.svg")
    probes = [0.1, 0.5, 1.0, 1.4]
    _emit({"mode": mode.value, "sigma_bar": sd.sigma_bar,
           "eigenvalues": [sd.eig_unstable[0], sd.eig_stable[0]],
           "unstable_slope": float(sd.eig_unstable[1][0] / sd.eig_unstable[1][1]),
           "S0": {str(p): m.S0(p) for p in probes}, "U0": {str(p): m.U0(p) for p in probes},
           "files": [f"manifolds_{mode.value}.csv", f"manifolds_{mode.value}.svg"]})
    return 0


def cmd_zb(args):
    cfg = _cfg(args)
    mode = cfg.control_mode
    if args.phi is not None:
        _emit({"mode": mode.value, "phi": args.phi, "Zb": find_Zb(args.phi, mode, cfg.quad_tol)})
        return 0
    rows = _zb_rows(mode, cfg.grid_phi, cfg.quad_tol)
    out = cfg.out
    _write_rows(out / f"zb_{mode.value}.csv", ["phi", "psi"], rows)
    fig = Figure((-HALF_PI, 0.1), (0.0, HALF_PI), title=f"Z_b ({mode.value})",
                 xlabel="psi", ylabel="phi")
    fig.polyline([r[1] for r in rows], [r[0] for r in rows], PALETTE[2], 1.8)
    fig.save(out / f"zb_{mode.value}.svg")
    _emit({"mode": mode.value, "points": len(rows), "Zb_at_0": rows[0][1],
           "files": [f"zb_{mode.value}.csv", f"zb_{mode.value}.svg"]})
    return 0


def _energy_portrait(cfg):
    out = cfg.out
    rng = np.random.default_rng(cfg.seed)
    fig = Figure((-math.pi, math.pi), (-HALF_PI, HALF_PI), title="energy flow",
                 xlabel="psi", ylabel="phi")
    rows = []
    for k in range(cfg.fan):
        psi0 = rng.uniform(-math.pi, math.pi)
        phi0 = rng.uniform(-1.2, 1.2)
        for sgn in (1.0, -1.0):
            tr = energy.energy_phase_flow(psi0, phi0, sgn * 8.0, num=200)
            fig.polyline(tr.psi, tr.phi, PALETTE[3], 0.9)
            rows.extend((k, sgn, t, p, f) for t, p, f in zip(tr.tau, tr.psi, tr.phi))
    for c in (-math.pi, 0.0, math.pi):
        fig.polyline([c, c], [-HALF_PI, HALF_PI], PALETTE[1], 2.0)
    _write_rows(out / "portrait_energy.csv", ["traj", "direction", "tau", "psi", "phi"], rows)
    fig.save(out / "portrait_energy.svg")
    _emit({"energy": True, "equilibria_psi": [0.0, math.pi], "fan": cfg.fan,
           "files": ["portrait_energy.csv", "portrait_energy.svg"]})
    return 0


def cmd_portrait(args):
    cfg = _cfg(args)
    if args.quick:
        cfg = cfg.quick()
    if args.energy:
        return _energy_portrait(cfg)
    mode = cfg.control_mode
    out = cfg.out
    m = trace_manifolds(mode, cfg.quad_tol)
    fig = Figure((-HALF_PI, 1.5 * math.pi), (-HALF_PI, HALF_PI),
                 title=f"phase portrait ({mode.value})", xlabel="psi", ylabel="phi")
    rng = np.random.default_rng(cfg.seed)
    fcfg = FlowConfig(quad_tol=cfg.quad_tol, rtol=cfg.ode_rtol, atol=cfg.ode_atol)
    fan_files = []
    for k in range(cfg.fan):
        psi0 = rng.uniform(-HALF_PI, 1.5 * math.pi)
        phi0 = rng.uniform(-1.3, 1.3)
        for sgn in (1.0, -1.0):
            tr = integrate((psi0, phi0), mode=mode, stop=StopCondition(tau_max=sgn * 6.0),
                           tol=cfg.quad_tol, config=fcfg)
            fig.polyline(tr.psi, tr.phi, "#999999", 0.8)
            name = f"fan_{mode.value}_{k:03d}_{'fwd' if sgn > 0 else 'bwd'}.csv"
            tr.to_csv(out / name)
            fan_files.append(name)
    _draw_manifolds(fig, m)
    zb = _zb_rows(mode, cfg.grid_phi, cfg.quad_tol)
    for shift in (0.0, math.pi):
        fig.polyline([r[1] + shift for r in zb], [r[0] for r in zb], PALETTE[2], 1.4, dash="5,3")
        fig.polyline([-r[1] + shift for r in zb], [-r[0] for r in zb], PALETTE[2], 1.4, dash="5,3")
    for x in (0.0, math.pi):
        fig.marker(x, 0.0)
    fig.legend([("stable", PALETTE[0]), ("unstable", PALETTE[1]), ("Z_b", PALETTE[2])])
    _write_rows(out / f"manifolds_{mode.value}.csv", ["branch", "phi", "psi"], _manifold_rows(m))
    _write_rows(out / f"zb_{mode.value}.csv", ["phi", "psi"], zb)
    fig.save(out / f"portrait_{mode.value}.svg")
    _emit({"mode": mode.value, "equilibria": [[0.0, 0.0], [math.pi, 0.0]],
           "sigma_bar": m.sigma_bar, "fan": len(fan_files),
           "files": [f"portrait_{mode.value}.svg", f"manifolds_{mode.value}.csv",
                     f"zb_{mode.value}.csv"] + fan_files})
    return 0


# ---------------------------------------------------------------- transfer / energy

def _problem(args):
    if args.problem:
        try:
            text = Path(args.problem).read_text()
        except OSError as exc:
            raise DomainError(str(exc)) from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed JSON: {exc}") from None
        if args.mode and isinstance(d, dict):
            d.setdefault("mode", args.mode)
        return transfer.TransferProblem.from_dict(d)
    vals = (args.n0, args.n1, args.e0, args.e1)
    if any(v is None for v in vals):
        raise DomainError("give a problem file or all of --n0 --n1 --e0 --e1")
    return transfer.TransferProblem(*vals, mode=args.mode or "full")


def cmd_transfer(args):
    cfg = _cfg(args)
    prob = _problem(args)
    tcfg = transfer.TransferConfig(tol=cfg.quad_tol, tau_cap=cfg.tau_cap,
                                   flow=FlowConfig(quad_tol=cfg.quad_tol, rtol=cfg.ode_rtol,
                                                   atol=cfg.ode_atol))
    result = {}
    try:
        sol = transfer.solve(prob, cfg.quad_tol, tcfg)
        result["time"] = {"status": "solved", **sol.to_dict()}
        result["time"].pop("schema", None)
        result["time"].pop("problem", None)
        csv_path = Path(args.csv) if args.csv else cfg.out / "transfer.csv"
        sol.trajectory.to_csv(csv_path)
        result["trajectory_csv"] = str(csv_path)
        code = 0
    except NumericalFailure as exc:
        result["time"] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
        code = 1
    if args.compare_energy:
        ok = energy.energy_reachable(prob.phi0, prob.phi1)
        geo = energy.energy_geodesic((prob.n0, prob.e0), (prob.n1, prob.e1), num=201)
        ent = {"status": "reachable" if ok else "unreachable",
               "dphi": prob.phi1 - prob.phi0, "max_dphi": energy.MAX_DPHI}
        if geo.witness is not None:
            ent["exit_point"] = {"x": geo.witness.x, "z": geo.witness.z, "s": geo.witness_s}
        result["energy"] = ent
    _emit({"problem": prob.to_dict(), **result}, args.json_out)
    return code


def cmd_energy(args):
    cfg = _cfg(args)
    if args.check:
        f = energy.energy_phase_flow(2.0, 0.1, 20.0)
        K = energy.curvature_grid(np.linspace(0.5, 3.0, 6), np.linspace(-0.8, 0.8, 7))
        _emit({"first_integral_drift": f.drift(), "heteroclinic_dphi": energy.heteroclinic_dphi(),
               "max_dphi": energy.MAX_DPHI, "max_abs_curvature": float(np.max(np.abs(K)))})
        return 0
    vals = (args.n0, args.e0, args.n1, args.e1)
    if any(v is None for v in vals):
        raise DomainError("give --n0 --e0 --n1 --e1, or --check")
    geo = energy.energy_geodesic((args.n0, args.e0), (args.n1, args.e1), num=args.num)
    out = {"reachable": geo.reachable,
           "criterion": energy.energy_reachable(math.asin(args.e0), math.asin(args.e1))}
    if geo.reachable:
        path = cfg.out / "energy_geodesic.csv"
        _write_rows(path, ["s", "n", "e"], zip(geo.s, geo.n, geo.e))
        out.update(residual=geo.residual, csv=str(path))
    else:
        out["exit_point"] = {"x": geo.witness.x, "z": geo.witness.z, "s": geo.witness_s}
    _emit(out)
    return 0


# ---------------------------------------------------------------- raw-compare / validate

def cmd_raw_compare(args):
    cfg = _cfg(args)
    mode = cfg.control_mode
    start = rawdyn.GaussState(args.n0, args.e0, args.omega0, 0.0)
    reports = []
    for eps in args.eps:
        r = rawdyn.averaging_check(start, mode, eps, args.orbits, args.p_n, args.p_e)
        reports.append(r.to_dict())
    devs = [r["deviation"] for r in reports]
    order = sorted(range(len(args.eps)), key=lambda i: -args.eps[i])
    monotone = all(devs[order[i + 1]] < devs[order[i]] for i in range(len(order) - 1))
    p_n = args.p_n if args.p_n is not None else 1.0 / (3.0 * args.n0)
    cost = rawdyn.FrozenCostate(p_n, args.p_e, mode, max(args.eps), args.omega0)
    raw = rawdyn.propagate(start, costate=cost, orbits=args.orbits)
    path = cfg.out / "raw.csv"
    raw.to_csv(path)
    _emit({"mode": mode.value, "reports": reports, "monotone": monotone, "csv": str(path)})
    return 0 if monotone else 1


def cmd_validate(args):
    cfg = _cfg(args)
    modes = [args.mode] if args.mode else ["full", "tangential"]
    rep = run_suite(modes, quick=args.quick, sign_a=-1.0 if args.mutate_sign_a else 1.0,
                    tol=cfg.quad_tol, seed=cfg.seed, echo=lambda s: print(s, file=sys.stderr))
    _emit(rep.to_dict())
    return 0 if rep.passed else 1


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags take precedence")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", type=float, help="quadrature tolerance")
    common.add_argument("--seed", type=int)

    def mode_arg(p, required=False):
        p.add_argument("--mode", choices=["full", "tangential"], required=required)

    p = argparse.ArgumentParser(prog="avgtransfer",
                                description="Averaged low-thrust transfers to circular orbits.")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("eval", parents=[common], help="density, partials and field at a point")
    mode_arg(s)
    s.add_argument("--psi", type=float, required=True)
    s.add_argument("--phi", type=float, required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("portrait", parents=[common], help="phase portrait CSV + SVG")
    mode_arg(s)
    s.add_argument("--energy", action="store_true", help="energy flow instead")
    s.add_argument("--quick", action="store_true")
    s.set_defaults(func=cmd_portrait)

    s = sub.add_parser("manifolds", parents=[common], help="stable/unstable manifolds")
    mode_arg(s)
    s.set_defaults(func=cmd_manifolds)

    s = sub.add_parser("zb", parents=[common], help="zero curve of b")
    mode_arg(s)
    s.add_argument("--phi", type=float)
    s.set_defaults(func=cmd_zb)

    s = sub.add_parser("transfer", parents=[common], help="solve a transfer problem")
    mode_arg(s)
    s.add_argument("problem", nargs="?", help="problem JSON file")
    for k in ("n0", "n1", "e0", "e1"):
        s.add_argument(f"--{k}", type=float)
    s.add_argument("--csv", help="trajectory CSV path")
    s.add_argument("--json-out", help="write the solution JSON here instead of stdout")
    s.add_argument("--compare-energy", action="store_true")
    s.set_defaults(func=cmd_transfer)

    s = sub.add_parser("energy", parents=[common], help="energy geodesic between two orbits")
    for k in ("n0", "e0", "n1", "e1"):
        s.add_argument(f"--{k}", type=float)
    s.add_argument("--num", type=int, default=201)
    s.add_argument("--check", action="store_true", help="flatness and first-integral checks")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("raw-compare", parents=[common], help="raw Gauss vs averaged dynamics")
    mode_arg(s)
    s.add_argument("--eps", type=float, nargs="+", default=[1e-2, 1e-3])
    s.add_argument("--orbits", type=int, default=50)
    s.add_argument("--n0", type=float, default=1.0)
    s.add_argument("--e0", type=float, default=0.2)
    s.add_argument("--omega0", type=float, default=0.0)
    s.add_argument("--p-n", type=float, default=None)
    s.add_argument("--p-e", type=float, default=-1.0)
    s.set_defaults(func=cmd_raw_compare)

    s = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    mode_arg(s)
    s.add_argument("--quick", action="store_true", help="grid densities / 4")
    s.add_argument("--mutate-sign-a", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (AvgTransferError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
