#!/usr/bin/env node
/** Command line: one figure per invocation.
 *
 *   viscofem-plots convergence rates.csv --axis space --output fig.svg
 *   viscofem-plots energy wi0.csv wi1.csv --labels 0 1 --kind log_energy \
 *       --output fig.svg
 */
import { readFileSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { parseEnergyCsv, parseRateCsv } from "./csv.js";
import { plotConvergence } from "./convergence.js";
import { EnergyCurve, EnergyKind, plotEnergy } from "./energy.js";

export function main(argv: string[]): number {
  let failed = false;
  const parser = yargs(argv)
    .command(
      "convergence <csv>",
      "log-log error plot from a rate table",
      (y) => y
        .positional("csv", { type: "string", demandOption: true })
        .option("axis", {
          choices: ["space", "time"] as const, default: "space" as const,
        })
        .option("output", { type: "string", default: "convergence.svg" }),
      (args) => {
        const rows = parseRateCsv(readFileSync(args.csv, "utf8"));
        const kind = args.axis === "space"
          ? "convergence_space" : "convergence_time";
        writeFileSync(args.output, plotConvergence(rows, kind));
      },
    )
    .command(
      "energy <csv..>",
      "energy evolution curves from time series, one per file",
      (y) => y
        .positional("csv", { type: "string", array: true, demandOption: true })
        .option("labels", { type: "string", array: true, default: [] as string[] })
        .option("kind", {
          choices: ["energy", "log_energy"] as const,
          default: "energy" as const,
        })
        .option("output", { type: "string", default: "energy.svg" }),
      (args) => {
        const files = args.csv as string[];
        const curves: EnergyCurve[] = files.map((path, i) => ({
          label: args.labels[i] ?? path,
          rows: parseEnergyCsv(readFileSync(path, "utf8")),
        }));
        writeFileSync(args.output, plotEnergy(curves, args.kind as EnergyKind));
      },
    )
    .demandCommand(1)
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      process.stderr.write(`${(err && err.message) || msg}\n`);
      failed = true;
    });
  try {
    parser.parseSync();
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    failed = true;
  }
  return failed ? 1 : 0;
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(hideBin(process.argv)));
}
