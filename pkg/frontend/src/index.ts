export {
  EmptyDataError, MissingColumnError, parseEnergyCsv, parseRateCsv,
} from "./csv.js";
export type { EnergyRow, RateRow } from "./csv.js";
export { convergenceSeries, fitSlope, plotConvergence } from "./convergence.js";
export type { ConvergenceKind, ConvergenceSeries } from "./convergence.js";
export { plotEnergy, truncatedPoints } from "./energy.js";
export type { EnergyCurve, EnergyKind } from "./energy.js";
export { main } from "./cli.js";
