#!/usr/bin/env node
/**
 * plot convergence --csv results.csv --out fig.svg [--columns a,b]
 * plot condition   --csv sweep.csv   --out fig.svg
 *
 * Read-only consumer of the solver's CSV files; writes one SVG figure.
 */

import { PlotSpecError } from "./csv.js";
import { plotCondition } from "./condition.js";
import { plotConvergence } from "./convergence.js";

const USAGE = `usage:
  plot convergence --csv results.csv --out fig.svg [--columns col1,col2]
  plot condition   --csv sweep.csv   --out fig.svg`;

function parseFlags(args: string[]): Record<string, string> {
  const flags: Record<string, string> = {};
  for (let i = 0; i < args.length; i += 2) {
    const key = args[i];
    if (!key.startsWith("--") || i + 1 >= args.length) {
      throw new PlotSpecError(`bad argument "${key}"\n${USAGE}`);
    }
    flags[key.slice(2)] = args[i + 1];
  }
  return flags;
}

function requireFlags(flags: Record<string, string>, names: string[]): void {
  const missing = names.filter((n) => !(n in flags));
  if (missing.length > 0) {
    throw new PlotSpecError(
      `missing --${missing.join(", --")}\n${USAGE}`,
    );
  }
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    const flags = parseFlags(rest);
    if (command === "convergence") {
      requireFlags(flags, ["csv", "out"]);
      const { slopes } = plotConvergence({
        csv: flags["csv"],
        out: flags["out"],
        columns: flags["columns"]?.split(","),
      });
      for (const [col, s] of Object.entries(slopes)) {
        console.log(`slope[${col}] = ${s.toFixed(3)}`);
      }
      console.log(`wrote ${flags["out"]}`);
      return 0;
    }
    if (command === "condition") {
      requireFlags(flags, ["csv", "out"]);
      const { series } = plotCondition({ csv: flags["csv"], out: flags["out"] });
      console.log(
        `wrote ${flags["out"]} (${series.on.length} stabilized, ` +
          `${series.off.length} unstabilized points)`,
      );
      return 0;
    }
    throw new PlotSpecError(`unknown command "${command ?? ""}"\n${USAGE}`);
  } catch (err) {
    if (err instanceof Error) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.ts") || entry.endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
