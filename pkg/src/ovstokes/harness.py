"""Experiment drivers: single solves, convergence studies, condition sweeps.

All drivers produce lists of plain-dict rows with a fixed column order and
write them through :func:`emit_csv`, so CSV output is deterministic for a
given case. Figures are produced elsewhere from these files; nothing here
depends on plotting.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import (AssemblyConfig, apply_dirichlet, assemble_system,
                       errors_vs_exact, interface_pressure_jump,
                       split_solution)
from .cases import Case, gen_multi_patch, gen_two_patch
from .geometry import ConfigurationError
from .solve import SolverError, condition_number, solve_direct

__all__ = [
    "SolveOutcome",
    "case_from_config",
    "solve_case",
    "run_convergence",
    "run_condition_sweep",
    "fit_slope",
    "emit_csv",
    "read_csv",
    "CONVERGENCE_COLUMNS",
    "SWEEP_COLUMNS",
]

CONVERGENCE_COLUMNS = ["level", "h", "dofs", "err_energy_u", "err_l2_u",
                       "err_pressure", "err_l2_p", "jump", "cond", "wall_time",
                       "status"]
SWEEP_COLUMNS = ["eps", "stabilize", "cond", "dofs", "status"]


# ------------------------------------------------------------- case loading

def case_from_config(cfg: dict) -> Case:
    """Build a runnable case from a JSON-style config dict.

    Recognized keys: kind ("two-patch" | "multi-patch"), eps, n_patches,
    degree, theta, solution (registered manufactured-solution name or null).
    """
    kind = cfg.get("kind")
    kwargs = dict(degree=int(cfg.get("degree", 2)),
                  theta=float(cfg.get("theta", 0.1)),
                  solution=cfg.get("solution", "ms-stokes-2021"))
    if kind == "two-patch":
        eps = float(cfg["eps"])
        if not 0.0 < eps < 0.5:
            raise ConfigurationError(f"eps must be in (0, 0.5), got {eps}")
        return gen_two_patch(eps, **kwargs)
    if kind == "multi-patch":
        return gen_multi_patch(int(cfg["n_patches"]), **kwargs)
    raise ConfigurationError(f"unknown case kind {kind!r}")


def case_config_json(kind, **fields) -> str:
    cfg = {"kind": kind, "degree": 2, "theta": 0.1,
           "solution": "ms-stokes-2021"}
    cfg.update(fields)
    return json.dumps(cfg, indent=2, sort_keys=True)


# ----------------------------------------------------------------- one solve

@dataclass
class SolveOutcome:
    """Everything one solve produces; ``errors`` is None without exact data."""

    case: Case
    system: object
    x: np.ndarray
    vel: list
    pres: list
    report: object
    errors: dict | None
    jump: float
    wall_time: float


def solve_case(case: Case, config: AssemblyConfig | None = None) -> SolveOutcome:
    """Assemble, constrain, solve, and post-process one case."""
    config = config or AssemblyConfig()
    t0 = time.perf_counter()
    sol = case.solution or {}
    system = assemble_system(case.hierarchy, config, f=sol.get("f"),
                             neumann=sol.get("traction"),
                             dirichlet_faces=case.dirichlet)
    A, b, _ = apply_dirichlet(system, case.dirichlet, u_D=sol.get("u"))
    x, report = solve_direct(A, b, n_velocity=system.dofmap.n_velocity)
    vel, pres = split_solution(system, x)
    stab = system.stab if config.stabilize else None
    errors = (errors_vs_exact(case.hierarchy, vel, pres, sol, stab=stab)
              if case.solution else None)
    jump = interface_pressure_jump(case.hierarchy, pres, stab=stab)
    return SolveOutcome(case, system, x, vel, pres, report, errors, jump,
                        time.perf_counter() - t0)


# --------------------------------------------------------------- convergence

def fit_slope(hs, errors, floor=1e-11):
    """Least-squares slope of log(error) vs log(h); None when any value is at
    machine level (<= floor), where the slope is roundoff noise."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(hs) < 2 or np.any(errors <= floor) or np.any(hs <= 0):
        return None
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def run_convergence(case: Case, levels: int, config=None, with_cond=False,
                    progress=None):
    """Solve `levels` dyadically refined versions of the case.

    Returns (rows, slopes): one dict row per level plus a trailing "slope"
    row, and a dict of fitted slopes per error column. Solver failures are
    recorded in the row's status and the sweep continues.
    """
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    config = config or AssemblyConfig()
    rows = []
    current = case
    base_h = _mesh_h(case)
    for lev in range(levels):
        row = {c: "" for c in CONVERGENCE_COLUMNS}
        row.update(level=lev, h=base_h / 2 ** lev, status="ok")
        try:
            out = solve_case(current, config)
            row.update(dofs=out.system.dofmap.n_total, jump=out.jump,
                       wall_time=round(out.wall_time, 3))
            if out.errors:
                row.update(err_energy_u=out.errors["energy_u"],
                           err_l2_u=out.errors["l2_u"],
                           err_pressure=out.errors["pressure"],
                           err_l2_p=out.errors["l2_p"])
            if with_cond:
                A, _, _ = apply_dirichlet(out.system, current.dirichlet,
                                          u_D=(current.solution or {}).get("u"))
                row["cond"] = condition_number(
                    A, n_velocity=out.system.dofmap.n_velocity)
        except SolverError as exc:
            row["status"] = f"solver-error: {exc}"
        if progress:
            progress(row)
        rows.append(row)
        if lev + 1 < levels:
            current = current.refine_dyadic()
    slopes = {}
    ok = [r for r in rows if r["status"] == "ok" and r["err_energy_u"] != ""]
    for col in ("err_energy_u", "err_l2_u", "err_pressure", "err_l2_p"):
        s = fit_slope([r["h"] for r in ok], [r[col] for r in ok]) if ok else None
        slopes[col] = s
    srow = {c: "" for c in CONVERGENCE_COLUMNS}
    srow["level"] = "slope"
    for col, s in slopes.items():
        srow[col] = "" if s is None else s
    srow["status"] = "fit"
    rows.append(srow)
    return rows, slopes


def _mesh_h(case: Case) -> float:
    mesh = case.hierarchy.patches[0].spaces.pressure
    return 1.0 / mesh.kv_u.n_elements


# ------------------------------------------------------------ condition sweep

def run_condition_sweep(eps_list, degree=2, theta=0.1, gamma0=10.0, t=0.5,
                        progress=None):
    """kappa_2 of the constrained, Jacobi-scaled system on the unrefined
    meshes, for every eps and both stabilization modes."""
    rows = []
    for eps in eps_list:
        for stabilize in (True, False):
            row = {c: "" for c in SWEEP_COLUMNS}
            row.update(eps=eps, stabilize="on" if stabilize else "off",
                       status="ok")
            try:
                case = gen_two_patch(eps, degree=degree, theta=theta)
                cfg = AssemblyConfig(t=t, gamma0=gamma0, stabilize=stabilize)
                sol = case.solution
                system = assemble_system(case.hierarchy, cfg, f=sol["f"],
                                         neumann=sol["traction"],
                                         dirichlet_faces=case.dirichlet)
                A, _, _ = apply_dirichlet(system, case.dirichlet, u_D=sol["u"])
                row["dofs"] = system.dofmap.n_total
                row["cond"] = condition_number(
                    A, n_velocity=system.dofmap.n_velocity)
            except SolverError as exc:
                row["status"] = f"solver-error: {exc}"
            if progress:
                progress(row)
            rows.append(row)
    return rows


# -------------------------------------------------------------------- csv io

def emit_csv(rows, path, columns, metadata=()):
    """Write rows (dicts) with a fixed column order; metadata lines are
    written first as '# key: value' comments."""
    with open(path, "w", newline="") as f:
        for line in metadata:
            f.write(f"# {line}\n")
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})


def read_csv(path):
    """Read back an emitted CSV; returns (metadata lines, rows as dicts of
    strings)."""
    metadata, rows = [], []
    with open(path, newline="") as f:
        header = None
        for line in f:
            if line.startswith("#"):
                metadata.append(line[1:].strip())
                continue
            if header is None:
                header = next(csv.reader([line]))
                continue
            rows.append(dict(zip(header, next(csv.reader([line])))))
    return metadata, rows
