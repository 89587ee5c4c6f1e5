import type { Weight } from "./api.js";

/**
 * Render a probability the same way the command line does: four decimal
 * places, except that positive values too small to survive rounding are
 * shown as "0.00+" so they cannot be mistaken for exact zero.
 */
export function formatProbability(p: number): string {
  if (p > 0 && p < 5e-5) {
    return "0.00+";
  }
  return p.toFixed(4);
}

/** Costs and clairvoyance values use the same width as the CLI tables. */
export function formatAmount(x: number): string {
  return x.toFixed(4);
}

/** Evidence weights arrive as numbers or the strings "inf"/"-inf". */
export function formatWeight(w: Weight): string {
  if (w === "inf" || w === "-inf") {
    return w;
  }
  return w.toFixed(3);
}
