import { describe, expect, it } from "vitest";
import {
  EmptyDataError, ENERGY_COLUMNS, parseEnergyCsv,
} from "../src/csv.js";
import { plotEnergy, truncatedPoints } from "../src/energy.js";

const HEADER = ENERGY_COLUMNS.join(",");

function row(step: number, fields: Partial<Record<string, string>> = {}): string {
  const defaults: Record<string, string> = {
    step: String(step), time: String(step * 0.01), kinetic: "0.5",
    elastic: "1.0", logdet: "0.0", visc_diss: "0.1", relax_diss: "0.0",
    diff_diss: "0.0", identity_residual: "1e-12", min_det: "1.0",
    newton_iters: "2",
  };
  return ENERGY_COLUMNS.map((c) => fields[c] ?? defaults[c]).join(",");
}

function series(steps: number, infAt = -1): string {
  const lines = [HEADER];
  for (let s = 0; s < steps; s++) {
    lines.push(row(s, s === infAt ? { logdet: "inf", min_det: "-0.5" } : {}));
  }
  return lines.join("\n") + "\n";
}

describe("energy CSV", () => {
  it("round-trips numbers and reads the inf token", () => {
    const rows = parseEnergyCsv(series(3, 2));
    expect(rows).toHaveLength(3);
    expect(rows[0].kinetic).toBe(0.5);
    expect(rows[2].logdet).toBe(Infinity);
    expect(rows[2].min_det).toBe(-0.5);
  });

  it("names a missing column", () => {
    const broken = HEADER.replace("logdet,", "");
    expect(() => parseEnergyCsv(`${broken}\n`)).toThrow(/logdet/);
  });
});

describe("curve truncation", () => {
  it("stops the curve just before the first inf", () => {
    const rows = parseEnergyCsv(series(60, 40));
    const pts = truncatedPoints(rows, "log_energy");
    expect(pts).toHaveLength(40);
    expect(pts[39].time).toBeCloseTo(0.39, 12);
  });

  it("truncates the total-energy curve too, since inf propagates", () => {
    const rows = parseEnergyCsv(series(10, 5));
    expect(truncatedPoints(rows, "energy")).toHaveLength(5);
  });

  it("keeps every step of a finite series", () => {
    const rows = parseEnergyCsv(series(10));
    expect(truncatedPoints(rows, "energy")).toHaveLength(10);
  });
});

describe("energy figures", () => {
  it("renders a single-row series as a valid one-point figure", () => {
    const svg = plotEnergy(
      [{ label: "1", rows: parseEnergyCsv(series(1)) }], "energy");
    expect(svg).toContain("<svg");
    expect(svg).toContain("<circle");
    expect(svg).not.toContain("<polyline");
  });

  it("orders the legend by Weissenberg number", () => {
    const curves = ["8", "0.5", "1", "0", "4", "2"].map((wi) => ({
      label: wi, rows: parseEnergyCsv(series(4)),
    }));
    const svg = plotEnergy(curves, "energy");
    const labels = [...svg.matchAll(/Wi ([\d.]+)</g)].map((m) => m[1]);
    expect(labels).toEqual(["0", "0.5", "1", "2", "4", "8"]);
  });

  it("rejects a figure with no curves or no finite values", () => {
    expect(() => plotEnergy([], "energy")).toThrow(EmptyDataError);
    const rows = parseEnergyCsv(series(3, 0));
    expect(() => plotEnergy([{ label: "8", rows }], "log_energy"))
      .toThrow(EmptyDataError);
  });

  it("is deterministic", () => {
    const rows = parseEnergyCsv(series(12, 7));
    const make = () => plotEnergy([{ label: "1", rows }], "log_energy");
    expect(make()).toBe(make());
  });
});
