/** Log-log convergence figures from rate tables. For a spatial figure
 * the rows at the finest time step are plotted against h; for a temporal
 * figure the rows on the finest mesh are plotted against dt. Each error
 * curve is annotated with its least-squares slope, and dashed guide
 * lines of slopes 1, 2, 3 are drawn for reference. */
import { EmptyDataError, RateRow } from "./csv.js";
import {
  HEIGHT, MARGIN, PALETTE, SvgBuilder, WIDTH,
  drawAxes, drawLegend, logScale,
} from "./svg.js";

export type ConvergenceKind = "convergence_space" | "convergence_time";

const FIELDS = [
  { key: "err_v", label: "velocity" },
  { key: "err_p", label: "pressure" },
  { key: "err_F", label: "deformation" },
] as const;

/** Least-squares slope of ln(y) against ln(x). */
export function fitSlope(xs: number[], ys: number[]): number {
  if (xs.length < 2) throw new EmptyDataError("slope fit (need two points)");
  const lx = xs.map(Math.log);
  const ly = ys.map(Math.log);
  const n = lx.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) ** 2;
  }
  return num / den;
}

export interface ConvergenceSeries {
  label: string;
  x: number[];
  errors: number[];
  slope: number;
}

/** Select the refinement sweep for one axis and fit per-field slopes. */
export function convergenceSeries(
  rows: RateRow[],
  kind: ConvergenceKind,
): ConvergenceSeries[] {
  if (rows.length === 0) throw new EmptyDataError("rate table");
  const frozen = kind === "convergence_space" ? "dt" : "h";
  const moving = kind === "convergence_space" ? "h" : "dt";
  const finest = Math.min(...rows.map((row) => row[frozen]));
  const sweep = rows
    .filter((row) => row[frozen] === finest)
    .sort((a, b) => a[moving] - b[moving]);
  if (sweep.length === 0) throw new EmptyDataError("rate table sweep");
  return FIELDS.map((field) => {
    const x = sweep.map((row) => row[moving]);
    const errors = sweep.map((row) => row[field.key]);
    return { label: field.label, x, errors, slope: fitSlope(x, errors) };
  });
}

export function plotConvergence(rows: RateRow[], kind: ConvergenceKind): string {
  const series = convergenceSeries(rows, kind);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.errors).filter((y) => y > 0);
  if (ys.length === 0) throw new EmptyDataError("positive errors");
  const xScale = logScale(Math.min(...xs), Math.max(...xs),
    MARGIN.left, WIDTH - MARGIN.right);
  const yScale = logScale(Math.min(...ys) / 2, Math.max(...ys) * 2,
    HEIGHT - MARGIN.bottom, MARGIN.top);

  const svg = new SvgBuilder();
  const xLabel = kind === "convergence_space" ? "h" : "dt";
  drawAxes(svg, xScale, yScale, xLabel, "error");

  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yRef = Math.min(...ys);
  for (const slope of [1, 2, 3]) {
    const y0 = yRef;
    const y1 = yRef * (xHi / xLo) ** slope;
    svg.polyline(
      [[xScale(xLo), yScale(y0)], [xScale(xHi), yScale(y1)]],
      "#999999", "4 3",
    );
    svg.text(xScale(xHi) + 4, yScale(y1) + 4, `slope ${slope}`,
      "fill:#999999");
  }

  const legend: { label: string; color: string }[] = [];
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.x.map((x, k) =>
      [xScale(x), yScale(s.errors[k])] as [number, number]);
    svg.polyline(pts, color);
    for (const [px, py] of pts) svg.circle(px, py, 3, color);
    const label = `${s.label}  slope ${s.slope.toFixed(2)}`;
    legend.push({ label, color });
  });
  drawLegend(svg, legend);
  return svg.render();
}
