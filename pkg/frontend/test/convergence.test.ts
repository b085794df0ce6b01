import { describe, expect, it } from "vitest";
import {
  EmptyDataError, MissingColumnError, parseRateCsv,
} from "../src/csv.js";
import {
  convergenceSeries, fitSlope, plotConvergence,
} from "../src/convergence.js";

function rateCsv(rows: number[][]): string {
  return ["h,dt,err_v,err_p,err_F",
    ...rows.map((r) => r.join(","))].join("\n") + "\n";
}

/** Exact power-law table: err_v = h^3, err_p = err_F = h^2, fixed dt. */
function exactSlopeCsv(): string {
  const hs = [0.25, 0.125, 0.0625, 0.03125];
  return rateCsv(hs.map((h) => [h, 0.001, h ** 3, h ** 2, h ** 2]));
}

describe("slope fitting", () => {
  it("recovers exact power laws to well within 0.01", () => {
    const rows = parseRateCsv(exactSlopeCsv());
    const series = convergenceSeries(rows, "convergence_space");
    expect(Math.abs(series[0].slope - 3)).toBeLessThan(0.01);
    expect(Math.abs(series[1].slope - 2)).toBeLessThan(0.01);
    expect(Math.abs(series[2].slope - 2)).toBeLessThan(0.01);
  });

  it("annotates the fitted slope in the figure", () => {
    const svg = plotConvergence(parseRateCsv(exactSlopeCsv()),
      "convergence_space");
    expect(svg).toContain("velocity  slope 3.00");
    expect(svg).toContain("pressure  slope 2.00");
  });

  it("fits a temporal sweep on the finest mesh only", () => {
    const rows = parseRateCsv(rateCsv([
      [0.25, 0.02, 1.0, 1.0, 1.0],
      [0.25, 0.01, 0.9, 0.9, 0.9],
      [0.125, 0.02, 0.04, 0.04, 0.04],
      [0.125, 0.01, 0.02, 0.02, 0.02],
    ]));
    const series = convergenceSeries(rows, "convergence_time");
    expect(series[0].x).toEqual([0.01, 0.02]);
    expect(series[0].slope).toBeCloseTo(1.0, 10);
  });

  it("needs at least two points", () => {
    expect(() => fitSlope([0.1], [1e-3])).toThrow(EmptyDataError);
  });
});

describe("convergence figures", () => {
  it("rejects an empty rate table instead of drawing a blank figure", () => {
    const rows = parseRateCsv("h,dt,err_v,err_p,err_F\n");
    expect(() => plotConvergence(rows, "convergence_space"))
      .toThrow(EmptyDataError);
  });

  it("names a missing column", () => {
    expect(() => parseRateCsv("h,dt,err_v,err_p\n0.1,0.1,1,1\n"))
      .toThrow(/err_F/);
    expect(() => parseRateCsv("h,dt,err_v,err_p\n"))
      .toThrow(MissingColumnError);
  });

  it("survives plateau-then-first-order temporal data", () => {
    const dts = [0.02, 0.01, 0.005, 0.0025, 0.00125];
    const rows = parseRateCsv(rateCsv(dts.map((dt) => {
      const err = Math.max(1e-4, 0.05 * dt);
      return [0.0625, dt, err, err, err];
    })));
    const svg = plotConvergence(rows, "convergence_time");
    expect(svg).toContain("<svg");
    expect(svg).toContain("slope 1</text>");
    expect(svg).toContain("slope 2</text>");
    expect(svg).toContain("slope 3</text>");
  });

  it("is deterministic: identical CSV gives identical SVG", () => {
    const a = plotConvergence(parseRateCsv(exactSlopeCsv()), "convergence_space");
    const b = plotConvergence(parseRateCsv(exactSlopeCsv()), "convergence_space");
    expect(a).toBe(b);
  });
});
