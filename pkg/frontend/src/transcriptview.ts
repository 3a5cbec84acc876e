/**
 * Derive display rows from raw transcript records. Model output streams in
 * small deltas; the view merges consecutive deltas of the same turn (and the
 * same dropped flag) into one row so the transcript reads as utterances,
 * not packets. Pure: rows are a function of the record list.
 */

import type { TranscriptRecord } from "./feed.js";

export type TranscriptRow =
  | { type: "user-text"; text: string; confidence: number }
  | { type: "user-audio"; durationMs: number; label: string }
  | { type: "user-interrupt"; turnId: string }
  | { type: "model-text"; turnId: string; text: string; dropped: boolean }
  | { type: "model-audio"; turnId: string; durationMs: number; dropped: boolean }
  | { type: "card"; callId: string }
  | { type: "context"; message: string; requestResponse: boolean }
  | { type: "config"; inputMode: string; echo: boolean };

export function buildTranscriptRows(
  records: TranscriptRecord[],
): TranscriptRow[] {
  const rows: TranscriptRow[] = [];
  const last = (): TranscriptRow | undefined => rows[rows.length - 1];

  for (const record of records) {
    const body = record.body;
    if (record.direction === "user" && record.kind === "text") {
      rows.push({
        type: "user-text",
        text: String(body.text),
        confidence: Number(body.confidence),
      });
    } else if (record.direction === "user" && record.kind === "audio-ms") {
      const duration = Number(body.duration_ms);
      const label = typeof body.payload_ref === "string" ? body.payload_ref : "";
      const prev = last();
      if (prev?.type === "user-audio") {
        prev.durationMs += duration;
        if (!prev.label && label) prev.label = label;
      } else {
        rows.push({ type: "user-audio", durationMs: duration, label });
      }
    } else if (record.direction === "user" && record.kind === "state-change") {
      rows.push({ type: "user-interrupt", turnId: String(body.turn_id) });
    } else if (record.direction === "model" && record.kind === "text") {
      const turnId = String(body.turn_id);
      const dropped = Boolean(body.dropped);
      const prev = last();
      if (prev?.type === "model-text" && prev.turnId === turnId && prev.dropped === dropped) {
        prev.text += String(body.text);
      } else {
        rows.push({ type: "model-text", turnId, text: String(body.text), dropped });
      }
    } else if (record.direction === "model" && record.kind === "audio-ms") {
      const turnId = String(body.turn_id);
      const dropped = Boolean(body.dropped);
      const prev = last();
      if (prev?.type === "model-audio" && prev.turnId === turnId && prev.dropped === dropped) {
        prev.durationMs += Number(body.duration_ms);
      } else {
        rows.push({
          type: "model-audio",
          turnId,
          durationMs: Number(body.duration_ms),
          dropped,
        });
      }
    } else if (record.kind === "function-card") {
      const callId = String(body.call_id);
      // One row per call: the completion updates the card, not the layout,
      // except self-initiated calls whose only record is the completion.
      const seen = rows.some((r) => r.type === "card" && r.callId === callId);
      if (!seen) rows.push({ type: "card", callId });
    } else if (record.direction === "system" && record.kind === "context") {
      rows.push({
        type: "context",
        message: String(body.message),
        requestResponse: Boolean(body.request_response),
      });
    } else if (record.direction === "system" && record.kind === "state-change") {
      if (typeof body.input_mode === "string") {
        rows.push({
          type: "config",
          inputMode: String(body.input_mode),
          echo: Boolean(body.config_echo),
        });
      }
      // plain {state} changes drive the capsule, not the transcript
    }
  }
  return rows;
}
