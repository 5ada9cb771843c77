"""Command-line entry point for running the Stokes experiments.

Subcommands: solve, convergence, condition-sweep, gen. Results are CSV files
(deterministic column order); geometry can be dumped as line-oriented JSON.
The exit code is nonzero iff any requested solve failed.
"""

from __future__ import annotations

import argparse
import json
import sys

from .assembly import AssemblyConfig
from .geometry import ConfigurationError, GeometryError
from .harness import (CONVERGENCE_COLUMNS, SWEEP_COLUMNS, case_config_json,
                      case_from_config, emit_csv, run_condition_sweep,
                      run_convergence, solve_case)
from .solve import SolverError

FLUX_T = {"symmetric": 0.5, "onesided": 1.0}


def _load_case(path, args):
    with open(path) as f:
        cfg = json.load(f)
    if getattr(args, "theta", None) is not None:
        cfg["theta"] = args.theta
    return case_from_config(cfg), cfg


def _assembly_config(args):
    return AssemblyConfig(t=FLUX_T[args.flux], gamma0=args.gamma0,
                          stabilize=args.stabilize == "on")


def _add_solve_opts(p):
    p.add_argument("--stabilize", choices=["on", "off"], default="on")
    p.add_argument("--theta", type=float, default=None,
                   help="bad-element threshold on the visible area ratio")
    p.add_argument("--gamma0", type=float, default=10.0)
    p.add_argument("--flux", choices=sorted(FLUX_T), default="symmetric")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ovstokes",
        description="Stokes solver on hierarchically overlapping spline "
                    "patches with minimal extrapolation stabilization.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one case and report its errors")
    p.add_argument("case", help="case JSON file")
    _add_solve_opts(p)
    p.add_argument("--out", default=None, help="write a one-row result CSV")
    p.add_argument("--dump-geometry", default=None,
                   help="write the clipped geometry as line-oriented JSON")

    p = sub.add_parser("convergence", help="dyadic refinement study")
    p.add_argument("case")
    p.add_argument("--levels", type=int, required=True)
    _add_solve_opts(p)
    p.add_argument("--with-cond", action="store_true",
                   help="also record kappa_2 per level (dense SVD, size-capped)")
    p.add_argument("--out", default="convergence.csv")

    p = sub.add_parser("condition-sweep",
                       help="kappa_2 vs eps on the fixed coarse meshes")
    p.add_argument("--eps", required=True,
                   help="comma-separated eps values, e.g. 1e-2,1e-4,1e-6")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--gamma0", type=float, default=10.0)
    p.add_argument("--flux", choices=sorted(FLUX_T), default="symmetric")
    p.add_argument("--out", default="condition_sweep.csv")

    p = sub.add_parser("gen", help="emit a case JSON file")
    gsub = p.add_subparsers(dest="family", required=True)
    g2 = gsub.add_parser("two-patch")
    g2.add_argument("--eps", type=float, required=True)
    g2.add_argument("--out", default=None)
    gm = gsub.add_parser("multi-patch")
    gm.add_argument("--n", type=int, required=True)
    gm.add_argument("--out", default=None)
    return ap


def _cmd_solve(args):
    case, _ = _load_case(args.case, args)
    out = solve_case(case, _assembly_config(args))
    if args.dump_geometry:
        case.hierarchy.dump(args.dump_geometry)
    row = {c: "" for c in CONVERGENCE_COLUMNS}
    row.update(level=0, h="", dofs=out.system.dofmap.n_total, jump=out.jump,
               wall_time=round(out.wall_time, 3), status="ok")
    if out.errors:
        row.update(err_energy_u=out.errors["energy_u"],
                   err_l2_u=out.errors["l2_u"],
                   err_pressure=out.errors["pressure"],
                   err_l2_p=out.errors["l2_p"])
    print(f"solved {case.name}: {out.system.dofmap.n_total} unknowns, "
          f"residual {out.report.rel_residual:.2e}, "
          f"jump {out.jump:.3e}, wall {out.wall_time:.2f}s")
    if out.errors:
        print("errors: " + ", ".join(f"{k}={v:.4e}"
                                     for k, v in out.errors.items()))
    if args.out:
        emit_csv([row], args.out, CONVERGENCE_COLUMNS,
                 metadata=[f"case: {case.name}",
                           f"stabilize: {args.stabilize}", f"flux: {args.flux}"])
    return 0


def _progress_print(row):
    print("  " + ", ".join(f"{k}={v}" for k, v in row.items() if v != ""),
          flush=True)


def _cmd_convergence(args):
    case, _ = _load_case(args.case, args)
    rows, slopes = run_convergence(case, args.levels, _assembly_config(args),
                                   with_cond=args.with_cond,
                                   progress=_progress_print)
    emit_csv(rows, args.out, CONVERGENCE_COLUMNS,
             metadata=[f"case: {case.name}", f"stabilize: {args.stabilize}",
                       f"flux: {args.flux}", f"levels: {args.levels}"])
    for col, s in slopes.items():
        print(f"slope[{col}] = " + ("undefined" if s is None else f"{s:.3f}"))
    print(f"wrote {args.out}")
    failures = [r for r in rows if r["status"] not in ("ok", "fit")]
    return 1 if failures else 0


def _cmd_sweep(args):
    eps_list = [float(s) for s in args.eps.split(",") if s]
    rows = run_condition_sweep(eps_list, degree=args.degree,
                               gamma0=args.gamma0, t=FLUX_T[args.flux],
                               progress=_progress_print)
    emit_csv(rows, args.out, SWEEP_COLUMNS,
             metadata=["mesh: unrefined 8x8 background + 5x5 trapezoid",
                       f"degree: {args.degree}", f"flux: {args.flux}",
                       "preconditioner: symmetric Jacobi (abs diagonal, "
                       "zero pressure diagonal substituted)"])
    print(f"wrote {args.out}")
    failures = [r for r in rows if r["status"] != "ok"]
    return 1 if failures else 0


def _cmd_gen(args):
    if args.family == "two-patch":
        if not 0.0 < args.eps < 0.5:
            raise ConfigurationError(f"eps must be in (0, 0.5), got {args.eps}")
        text = case_config_json("two-patch", eps=args.eps)
    else:
        text = case_config_json("multi-patch", n_patches=args.n)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"solve": _cmd_solve, "convergence": _cmd_convergence,
                "condition-sweep": _cmd_sweep, "gen": _cmd_gen}
    try:
        return handlers[args.command](args)
    except (SolverError, GeometryError, ConfigurationError, OSError,
            ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
