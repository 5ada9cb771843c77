/**
 * Condition-number-vs-trimming figure from a sweep CSV.
 *
 * The sweep CSV has one row per (eps, stabilize) pair; this pivots it into
 * the stabilized and unstabilized kappa_2 series and renders both on one
 * log-log chart.
 */

import { writeFileSync } from "node:fs";
import { PlotSpecError, readTable, requireColumns } from "./csv.js";
import { renderLogLogChart } from "./svg.js";

export interface ConditionSpec {
  csv: string;
  out: string;
  title?: string;
}

export interface ConditionResult {
  series: Record<"on" | "off", [number, number][]>;
  svg: string;
}

export function plotCondition(spec: ConditionSpec): ConditionResult {
  const table = readTable(spec.csv);
  requireColumns(table, ["eps", "stabilize", "cond"], spec.csv);
  const series: Record<"on" | "off", [number, number][]> = { on: [], off: [] };
  for (const row of table.rows) {
    if (table.columns.includes("status") && row["status"] !== "ok") continue;
    const mode = row["stabilize"];
    if (mode !== "on" && mode !== "off") {
      throw new PlotSpecError(
        `${spec.csv}: stabilize must be "on" or "off", got "${mode}"`,
      );
    }
    const eps = Number(row["eps"]);
    const cond = Number(row["cond"]);
    if (!Number.isFinite(eps) || !Number.isFinite(cond)) {
      throw new PlotSpecError(
        `${spec.csv}: non-numeric eps/cond in row ${JSON.stringify(row)}`,
      );
    }
    series[mode].push([eps, cond]);
  }
  for (const mode of ["on", "off"] as const) {
    if (series[mode].length === 0) {
      throw new PlotSpecError(
        `${spec.csv}: no usable rows with stabilize=${mode}; ` +
          `both modes are required for the comparison figure`,
      );
    }
    series[mode].sort((a, b) => a[0] - b[0]);
  }

  const svg = renderLogLogChart({
    title: spec.title ?? "Conditioning vs trimming parameter",
    xLabel: "trimming parameter eps",
    yLabel: "kappa_2 (Jacobi-scaled)",
    series: [
      { label: "stabilized", points: series.on, color: "#1f77b4" },
      {
        label: "unstabilized",
        points: series.off,
        color: "#d62728",
        dashed: true,
      },
    ],
    xDescending: true,
  });
  writeFileSync(spec.out, svg);
  return { series, svg };
}
