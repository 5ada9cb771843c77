#!/usr/bin/env python3
"""Error sensitivity to the number of overlapping patches.

Solves the manufactured-solution case with 2..5 stacked patches at comparable
resolution and prints the error spread; adding patches should not have an
important effect on the errors.
"""

import argparse

from ovstokes.cases import gen_multi_patch
from ovstokes.harness import CONVERGENCE_COLUMNS, emit_csv, solve_case


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-n", type=int, default=5)
    ap.add_argument("--out", default="results/multipatch.csv")
    args = ap.parse_args()
    rows = []
    for n in range(2, args.max_n + 1):
        out = solve_case(gen_multi_patch(n))
        row = {c: "" for c in CONVERGENCE_COLUMNS}
        row.update(level=n, h=1.0 / 8, dofs=out.system.dofmap.n_total,
                   err_energy_u=out.errors["energy_u"],
                   err_l2_u=out.errors["l2_u"],
                   err_pressure=out.errors["pressure"],
                   err_l2_p=out.errors["l2_p"], jump=out.jump,
                   wall_time=round(out.wall_time, 3), status="ok")
        rows.append(row)
        print(f"n={n}: l2_u={out.errors['l2_u']:.4e} "
              f"l2_p={out.errors['l2_p']:.4e} dofs={out.system.dofmap.n_total}")
    emit_csv(rows, args.out, CONVERGENCE_COLUMNS,
             metadata=["study: patch-count sensitivity; 'level' column holds "
                       "the patch count n"])
    for col in ("err_l2_u", "err_l2_p"):
        vals = [row[col] for row in rows]
        print(f"{col}: max/min = {max(vals) / min(vals):.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
