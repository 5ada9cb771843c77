/**
 * Minimal deterministic SVG log-log chart renderer.
 *
 * Output depends only on the input spec (no timestamps, ids, or environment
 * data), so rendering the same data twice gives byte-identical files. Axis
 * ranges are padded outward to the enclosing decades, so every data point
 * lies strictly inside the plot area.
 */

export interface Series {
  label: string;
  points: [number, number][]; // (x, y), all > 0
  color: string;
  dashed?: boolean;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  /** extra legend text per series, e.g. a fitted slope */
  annotations?: string[];
  /** flip the x axis so values decrease to the right (refinement studies) */
  xDescending?: boolean;
}

export const WIDTH = 720;
export const HEIGHT = 520;
export const MARGIN = { left: 70, right: 30, top: 40, bottom: 55 };

const FMT = (v: number) => {
  const s = v.toPrecision(6);
  return String(Number(s));
};

function decadeRange(values: number[]): [number, number] {
  const lo = Math.floor(Math.min(...values.map(Math.log10)));
  const hi = Math.ceil(Math.max(...values.map(Math.log10)));
  return [lo, hi === lo ? lo + 1 : hi];
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function superscript(exp: number): string {
  const map: Record<string, string> = {
    "-": "⁻", "0": "⁰", "1": "¹", "2": "²", "3": "³",
    "4": "⁴", "5": "⁵", "6": "⁶", "7": "⁷", "8": "⁸",
    "9": "⁹",
  };
  return String(exp).split("").map((c) => map[c] ?? c).join("");
}

export function renderLogLogChart(spec: ChartSpec): string {
  const allX = spec.series.flatMap((s) => s.points.map((p) => p[0]));
  const allY = spec.series.flatMap((s) => s.points.map((p) => p[1]));
  if (allX.length === 0) throw new Error("no data points to plot");
  if (allX.some((v) => v <= 0) || allY.some((v) => v <= 0)) {
    throw new Error("log-log chart requires strictly positive data");
  }
  const [x0, x1] = decadeRange(allX);
  const [y0, y1] = decadeRange(allY);
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) => {
    let t = (Math.log10(x) - x0) / (x1 - x0);
    if (spec.xDescending) t = 1 - t;
    return MARGIN.left + t * plotW;
  };
  const py = (y: number) =>
    MARGIN.top + (1 - (Math.log10(y) - y0) / (y1 - y0)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
      `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
      `font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16">` +
      `${escapeXml(spec.title)}</text>`,
  );

  // grid and ticks at decade lines
  for (let e = x0; e <= x1; e++) {
    const x = px(10 ** e);
    parts.push(
      `<line x1="${FMT(x)}" y1="${MARGIN.top}" x2="${FMT(x)}" ` +
        `y2="${HEIGHT - MARGIN.bottom}" stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${FMT(x)}" y="${HEIGHT - MARGIN.bottom + 18}" ` +
        `text-anchor="middle" font-size="12">10${superscript(e)}</text>`,
    );
  }
  for (let e = y0; e <= y1; e++) {
    const y = py(10 ** e);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${FMT(y)}" ` +
        `x2="${WIDTH - MARGIN.right}" y2="${FMT(y)}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${FMT(y + 4)}" text-anchor="end" ` +
        `font-size="12">10${superscript(e)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" ` +
      `height="${plotH}" fill="none" stroke="#333333"/>`,
  );

  // axis labels
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 12}" ` +
      `text-anchor="middle" font-size="14">${escapeXml(spec.xLabel)}</text>`,
  );
  parts.push(
    `<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `font-size="14" transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">` +
      `${escapeXml(spec.yLabel)}</text>`,
  );

  // series
  spec.series.forEach((s, i) => {
    const pts = s.points
      .map(([x, y]) => `${FMT(px(x))},${FMT(py(y))}`)
      .join(" ");
    const dash = s.dashed ? ` stroke-dasharray="6,4"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${s.color}" ` +
        `stroke-width="2"${dash} data-series="${escapeXml(s.label)}"/>`,
    );
    for (const [x, y] of s.points) {
      parts.push(
        `<circle cx="${FMT(px(x))}" cy="${FMT(py(y))}" r="3" ` +
          `fill="${s.color}"/>`,
      );
    }
    const ly = MARGIN.top + 14 + 18 * i;
    const lx = MARGIN.left + plotW - 240;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 24}" y2="${ly - 4}" ` +
        `stroke="${s.color}" stroke-width="2"${dash}/>`,
    );
    const extra = spec.annotations?.[i] ? `  ${spec.annotations[i]}` : "";
    parts.push(
      `<text x="${lx + 30}" y="${ly}" font-size="12">` +
        `${escapeXml(s.label + extra)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
