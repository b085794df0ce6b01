/** Readers for the solver's CSV contracts: convergence rate tables
 * (h,dt,err_v,err_p,err_F) and energy time series. Non-finite energies
 * appear as the literal token `inf`. */
import Papa from "papaparse";

export class MissingColumnError extends Error {
  constructor(column: string) {
    super(`missing column: ${column}`);
    this.name = "MissingColumnError";
  }
}

export class EmptyDataError extends Error {
  constructor(what: string) {
    super(`no data rows in ${what}`);
    this.name = "EmptyDataError";
  }
}

export const RATE_COLUMNS = ["h", "dt", "err_v", "err_p", "err_F"] as const;

export const ENERGY_COLUMNS = [
  "step", "time", "kinetic", "elastic", "logdet", "visc_diss",
  "relax_diss", "diff_diss", "identity_residual", "min_det", "newton_iters",
] as const;

export interface RateRow {
  h: number;
  dt: number;
  err_v: number;
  err_p: number;
  err_F: number;
}

export interface EnergyRow {
  step: number;
  time: number;
  kinetic: number;
  elastic: number;
  logdet: number;
  visc_diss: number;
  relax_diss: number;
  diff_diss: number;
  identity_residual: number;
  min_det: number;
  newton_iters: number;
}

function parseNumber(token: string): number {
  const t = token.trim();
  if (t === "inf") return Infinity;
  if (t === "-inf") return -Infinity;
  const x = Number(t);
  if (t === "" || Number.isNaN(x)) {
    throw new Error(`not a number: ${JSON.stringify(token)}`);
  }
  return x;
}

function parseTable(
  text: string,
  required: readonly string[],
): Record<string, number>[] {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new Error(`CSV parse error: ${parsed.errors[0].message}`);
  }
  const [header, ...rows] = parsed.data;
  if (!header) throw new EmptyDataError("CSV");
  for (const col of required) {
    if (!header.includes(col)) throw new MissingColumnError(col);
  }
  return rows.map((cells) => {
    const record: Record<string, number> = {};
    header.forEach((name, i) => {
      record[name] = parseNumber(cells[i] ?? "");
    });
    return record;
  });
}

export function parseRateCsv(text: string): RateRow[] {
  return parseTable(text, RATE_COLUMNS) as unknown as RateRow[];
}

export function parseEnergyCsv(text: string): EnergyRow[] {
  return parseTable(text, ENERGY_COLUMNS) as unknown as EnergyRow[];
}
