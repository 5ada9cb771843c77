/**
 * Reader for the solver's result CSVs.
 *
 * The files are plain comma-separated tables written by the Python harness:
 * optional leading `# key: value` metadata comments, then a header row, then
 * data rows. Fields never contain commas or quotes, so no quoting rules are
 * needed. The reader is strictly read-only.
 */

import { readFileSync } from "node:fs";

export interface Table {
  metadata: string[];
  columns: string[];
  rows: Record<string, string>[];
}

export class PlotSpecError extends Error {}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf-8");
  const metadata: string[] = [];
  let columns: string[] | null = null;
  const rows: Record<string, string>[] = [];
  for (const line of text.split(/\r?\n/)) {
    if (line === "") continue;
    if (line.startsWith("#")) {
      metadata.push(line.slice(1).trim());
      continue;
    }
    const fields = line.split(",");
    if (columns === null) {
      columns = fields;
      continue;
    }
    rows.push(Object.fromEntries(columns.map((c, i) => [c, fields[i] ?? ""])));
  }
  if (columns === null) {
    throw new PlotSpecError(`${path}: no header row found`);
  }
  return { metadata, columns, rows };
}

export function requireColumns(table: Table, names: string[], path: string): void {
  const missing = names.filter((n) => !table.columns.includes(n));
  if (missing.length > 0) {
    throw new PlotSpecError(
      `${path}: missing column(s) ${missing.join(", ")}; ` +
        `header has ${table.columns.join(", ")}`,
    );
  }
}

/** Rows with status "ok" (or no status column) and a parseable value in every
 *  listed column. */
export function numericRows(
  table: Table,
  names: string[],
): Record<string, number>[] {
  const out: Record<string, number>[] = [];
  for (const row of table.rows) {
    if (table.columns.includes("status") && row["status"] !== "ok") continue;
    const rec: Record<string, number> = {};
    let good = true;
    for (const n of names) {
      const v = Number(row[n]);
      if (row[n] === "" || !Number.isFinite(v)) {
        good = false;
        break;
      }
      rec[n] = v;
    }
    if (good) out.push(rec);
  }
  return out;
}
