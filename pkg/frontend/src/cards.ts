/**
 * Function card presentation. Cards render collapsed (one summary row) and
 * expand to the full call detail; expansion is UI-local state layered on
 * top of the view model, never part of it.
 */

import type { FunctionCard } from "./viewmodel.js";

export interface CardDetailLine {
  label: string;
  value: string;
}

/** Collapsed row text, e.g. `get_weather(...) 2 ms` or `move_to(...) failed`. */
export function cardSummary(card: FunctionCard): string {
  const name = card.selfInitiated ? `${card.name} (self-initiated)` : card.name;
  if (card.phase === "call") return `${name}(...) running`;
  if (card.isError) return `${name}(...) failed`;
  return `${name}(...) ${card.elapsedMs} ms`;
}

/** Expanded detail: arguments, then result payload and timing once known. */
export function cardDetail(card: FunctionCard): CardDetailLine[] {
  const lines: CardDetailLine[] = [
    { label: "arguments", value: JSON.stringify(card.arguments) },
  ];
  if (card.phase === "done") {
    lines.push({ label: "result", value: JSON.stringify(card.payload) });
    lines.push({ label: "elapsed_ms", value: String(card.elapsedMs) });
    if (card.isError) lines.push({ label: "error", value: "true" });
    if (card.selfInitiated) lines.push({ label: "self_initiated", value: "true" });
  } else {
    lines.push({ label: "result", value: "pending" });
  }
  return lines;
}

/** Toggle helper for the expansion set; returns a new set. */
export function toggleExpanded(
  expanded: ReadonlySet<string>,
  callId: string,
): Set<string> {
  const next = new Set(expanded);
  if (next.has(callId)) next.delete(callId);
  else next.add(callId);
  return next;
}
