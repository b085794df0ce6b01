import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { ENERGY_COLUMNS } from "../src/csv.js";
import { main } from "../src/cli.js";

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "plots-"));
}

const RATE_CSV = ["h,dt,err_v,err_p,err_F",
  "0.25,0.001,0.015625,0.0625,0.0625",
  "0.125,0.001,0.001953125,0.015625,0.015625",
  "0.0625,0.001,0.000244140625,0.00390625,0.00390625",
].join("\n") + "\n";

function energyCsv(steps: number): string {
  const lines = [ENERGY_COLUMNS.join(",")];
  for (let s = 0; s < steps; s++) {
    lines.push([s, s * 0.01, 0.5, 1.0, 0.0, 0.1, 0.0, 0.0,
      1e-12, 1.0, 2].join(","));
  }
  return lines.join("\n") + "\n";
}

describe("command line", () => {
  it("writes a convergence SVG with slope annotations", () => {
    const dir = tmp();
    const csv = join(dir, "rates.csv");
    const out = join(dir, "fig.svg");
    writeFileSync(csv, RATE_CSV);
    expect(main(["convergence", csv, "--axis", "space",
      "--output", out])).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain("slope 3.00");
    expect(svg).toContain("slope 2.00");
  });

  it("writes an energy SVG labeled by Wi", () => {
    const dir = tmp();
    const a = join(dir, "wi0.csv");
    const b = join(dir, "wi8.csv");
    const out = join(dir, "energy.svg");
    writeFileSync(a, energyCsv(5));
    writeFileSync(b, energyCsv(5));
    expect(main(["energy", a, b, "--labels", "0", "8",
      "--kind", "log_energy", "--output", out])).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain("Wi 0");
    expect(svg).toContain("Wi 8");
  });

  it("fails cleanly on a bad CSV", () => {
    const dir = tmp();
    const csv = join(dir, "bad.csv");
    writeFileSync(csv, "h,dt,err_v\n0.1,0.1,1\n");
    expect(main(["convergence", csv])).toBe(1);
  });

  it("fails cleanly on an unknown subcommand", () => {
    expect(main(["frobnicate"])).toBe(1);
  });
});
