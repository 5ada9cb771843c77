/**
 * Log-log convergence figure from a refinement-study CSV.
 *
 * Plots every selected error column against the mesh size h, annotates each
 * curve with its least-squares slope, and returns the slopes so the CLI can
 * print them. All numbers come from the CSV; nothing is recomputed from the
 * solver.
 */

import { writeFileSync } from "node:fs";
import { PlotSpecError, numericRows, readTable } from "./csv.js";
import { logLogSlope } from "./regression.js";
import { renderLogLogChart } from "./svg.js";

export const DEFAULT_ERROR_COLUMNS = [
  "err_energy_u",
  "err_l2_u",
  "err_pressure",
  "err_l2_p",
];

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

export interface ConvergenceSpec {
  csv: string;
  out: string;
  /** error columns to plot; defaults to every present default column */
  columns?: string[];
  title?: string;
}

export interface ConvergenceResult {
  slopes: Record<string, number>;
  svg: string;
}

export function plotConvergence(spec: ConvergenceSpec): ConvergenceResult {
  const table = readTable(spec.csv);
  let columns = spec.columns;
  if (columns === undefined) {
    columns = DEFAULT_ERROR_COLUMNS.filter((c) => table.columns.includes(c));
    if (columns.length === 0) {
      throw new PlotSpecError(
        `${spec.csv}: none of the default error columns ` +
          `(${DEFAULT_ERROR_COLUMNS.join(", ")}) are present`,
      );
    }
  } else {
    const missing = columns.filter((c) => !table.columns.includes(c));
    if (missing.length > 0) {
      throw new PlotSpecError(
        `${spec.csv}: missing column(s) ${missing.join(", ")}; ` +
          `header has ${table.columns.join(", ")}`,
      );
    }
  }
  if (!table.columns.includes("h")) {
    throw new PlotSpecError(`${spec.csv}: missing column(s) h`);
  }

  const slopes: Record<string, number> = {};
  const series = columns.map((col, i) => {
    const rows = numericRows(table, ["h", col]);
    if (rows.length < 3) {
      throw new PlotSpecError(
        `${spec.csv}: column ${col} has ${rows.length} usable levels, need >= 3`,
      );
    }
    slopes[col] = logLogSlope(
      rows.map((r) => r["h"]),
      rows.map((r) => r[col]),
    );
    return {
      label: col,
      points: rows.map((r) => [r["h"], r[col]] as [number, number]),
      color: COLORS[i % COLORS.length],
    };
  });

  const svg = renderLogLogChart({
    title: spec.title ?? "Convergence under dyadic refinement",
    xLabel: "mesh size h",
    yLabel: "error",
    series,
    annotations: columns.map((c) => `slope ${slopes[c].toFixed(2)}`),
    xDescending: true,
  });
  writeFileSync(spec.out, svg);
  return { slopes, svg };
}
