/**
 * Pure view-model builders. Every number shown in the UI originates from a
 * service response; these functions only format, never recompute.
 */

import type { QueryResponse } from "./schema.js";

export interface ResultRow {
  rank: number;
  label: string;
  /** probability rendered to exactly 3 decimals */
  probabilityText: string;
  /** bar width in percent, proportional to the top result */
  barPercent: number;
}

export function formatProbability(p: number): string {
  return p.toFixed(3);
}

export function resultRows(response: QueryResponse): ResultRow[] {
  const top = response.results[0]?.probability ?? 1;
  return response.results.map((entry) => ({
    rank: entry.rank,
    label: entry.label,
    probabilityText: formatProbability(entry.probability),
    barPercent: top > 0 ? Math.max(1, Math.round((entry.probability / top) * 100)) : 0,
  }));
}

/** Case-insensitive prefix filter over the label list. */
export function filterLabels(labels: readonly string[], prefix: string): string[] {
  const needle = prefix.toLowerCase();
  if (needle === "") {
    return [...labels];
  }
  return labels.filter((label) => label.toLowerCase().startsWith(needle));
}
