/** Energy evolution figures from the per-step time series. The total
 * energy curve is kinetic + elastic + logarithmic; the log-energy figure
 * shows the logarithmic term alone. A non-finite value (the `inf` token,
 * written when det F loses positivity) truncates the curve at the last
 * finite step. Curves are labeled by Weissenberg number and the legend
 * is ordered numerically. */
import { EmptyDataError, EnergyRow } from "./csv.js";
import {
  HEIGHT, MARGIN, PALETTE, SvgBuilder, WIDTH,
  drawAxes, drawLegend, linearScale,
} from "./svg.js";

export type EnergyKind = "energy" | "log_energy";

export interface EnergyCurve {
  label: string;
  rows: EnergyRow[];
}

function curveValue(row: EnergyRow, kind: EnergyKind): number {
  if (kind === "log_energy") return row.logdet;
  return row.kinetic + row.elastic + row.logdet;
}

/** Points up to (not including) the first non-finite value. */
export function truncatedPoints(
  rows: EnergyRow[],
  kind: EnergyKind,
): { time: number; value: number }[] {
  const out: { time: number; value: number }[] = [];
  for (const row of rows) {
    const value = curveValue(row, kind);
    if (!Number.isFinite(value)) break;
    out.push({ time: row.time, value });
  }
  return out;
}

function labelOrder(a: string, b: string): number {
  const na = Number(a);
  const nb = Number(b);
  if (Number.isFinite(na) && Number.isFinite(nb)) return na - nb;
  return a < b ? -1 : a > b ? 1 : 0;
}

export function plotEnergy(curves: EnergyCurve[], kind: EnergyKind): string {
  if (curves.length === 0) throw new EmptyDataError("energy figure");
  const ordered = [...curves].sort((a, b) => labelOrder(a.label, b.label));
  const traces = ordered.map((c) => ({
    label: c.label,
    points: truncatedPoints(c.rows, kind),
  }));
  const all = traces.flatMap((t) => t.points);
  if (all.length === 0) throw new EmptyDataError("energy figure (no finite values)");

  const times = all.map((p) => p.time);
  const values = all.map((p) => p.value);
  const vLo = Math.min(...values);
  const vHi = Math.max(...values);
  const pad = (vHi - vLo || Math.abs(vHi) || 1) * 0.05;
  const xScale = linearScale(Math.min(...times), Math.max(...times),
    MARGIN.left, WIDTH - MARGIN.right);
  const yScale = linearScale(vLo - pad, vHi + pad,
    HEIGHT - MARGIN.bottom, MARGIN.top);

  const svg = new SvgBuilder();
  const yLabel = kind === "log_energy" ? "log energy" : "total energy";
  drawAxes(svg, xScale, yScale, "time", yLabel);

  const legend: { label: string; color: string }[] = [];
  traces.forEach((trace, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = trace.points.map((p) =>
      [xScale(p.time), yScale(p.value)] as [number, number]);
    if (pts.length > 1) svg.polyline(pts, color);
    for (const [px, py] of pts) svg.circle(px, py, 2.5, color);
    const text = Number.isFinite(Number(trace.label))
      ? `Wi ${trace.label}` : trace.label;
    legend.push({ label: text, color });
  });
  drawLegend(svg, legend);
  return svg.render();
}
