import { describe, expect, it } from "vitest";
import type { TranscriptRecord } from "../src/feed.js";
import { buildTranscriptRows } from "../src/transcriptview.js";

let seq = 0;
function rec(
  direction: TranscriptRecord["direction"],
  kind: string,
  body: Record<string, unknown>,
): TranscriptRecord {
  seq += 1;
  return { seq, t_ms: seq * 10, direction, kind, body };
}

describe("buildTranscriptRows", () => {
  it("merges consecutive model deltas of one turn into one utterance", () => {
    const rows = buildTranscriptRows([
      rec("model", "text", { turn_id: "t1", text: "Hello " }),
      rec("model", "text", { turn_id: "t1", text: "there." }),
      rec("model", "audio-ms", { turn_id: "t1", duration_ms: 200 }),
      rec("model", "audio-ms", { turn_id: "t1", duration_ms: 200 }),
      rec("model", "audio-ms", { turn_id: "t1", duration_ms: 100 }),
    ]);
    expect(rows).toEqual([
      { type: "model-text", turnId: "t1", text: "Hello there.", dropped: false },
      { type: "model-audio", turnId: "t1", durationMs: 500, dropped: false },
    ]);
  });

  it("keeps dropped output separate and marked", () => {
    const rows = buildTranscriptRows([
      rec("model", "audio-ms", { turn_id: "t1", duration_ms: 400 }),
      rec("user", "state-change", { interrupt: true, turn_id: "t1" }),
      rec("model", "audio-ms", { turn_id: "t1", duration_ms: 200, dropped: true }),
      rec("model", "audio-ms", { turn_id: "t1", duration_ms: 200, dropped: true }),
    ]);
    expect(rows).toEqual([
      { type: "model-audio", turnId: "t1", durationMs: 400, dropped: false },
      { type: "user-interrupt", turnId: "t1" },
      { type: "model-audio", turnId: "t1", durationMs: 400, dropped: true },
    ]);
  });

  it("does not merge across turns", () => {
    const rows = buildTranscriptRows([
      rec("model", "audio-ms", { turn_id: "t1", duration_ms: 300 }),
      rec("model", "audio-ms", { turn_id: "t2", duration_ms: 300 }),
    ]);
    expect(rows).toHaveLength(2);
  });

  it("folds a chunked user utterance into one row with its label", () => {
    const rows = buildTranscriptRows([
      rec("user", "audio-ms", { seq: 1, duration_ms: 500, payload_ref: "look up" }),
      rec("user", "audio-ms", { seq: 2, duration_ms: 300 }),
      rec("user", "audio-ms", { seq: 3, duration_ms: 0 }),
    ]);
    expect(rows).toEqual([{ type: "user-audio", durationMs: 800, label: "look up" }]);
  });

  it("renders one card row per call_id, wherever the records land", () => {
    const rows = buildTranscriptRows([
      rec("model", "function-card", { phase: "call", call_id: "c1", name: "f", arguments: {} }),
      rec("system", "function-card", { call_id: "c1", name: "f", arguments: {}, payload: 1, is_error: false, elapsed_ms: 3, self_initiated: false }),
      rec("system", "function-card", { call_id: "self-1", name: "g", arguments: {}, payload: 2, is_error: false, elapsed_ms: 4, self_initiated: true }),
    ]);
    expect(rows).toEqual([
      { type: "card", callId: "c1" },
      { type: "card", callId: "self-1" },
    ]);
  });

  it("shows contexts and config changes, hides bare state changes", () => {
    const rows = buildTranscriptRows([
      rec("system", "context", { message: "[User touched my head]", request_response: true }),
      rec("system", "state-change", { state: "thinking" }),
      rec("system", "state-change", { input_mode: "direct_audio", tools: 7 }),
      rec("system", "state-change", { config_echo: true, input_mode: "direct_audio" }),
    ]);
    expect(rows).toEqual([
      { type: "context", message: "[User touched my head]", requestResponse: true },
      { type: "config", inputMode: "direct_audio", echo: false },
      { type: "config", inputMode: "direct_audio", echo: true },
    ]);
  });
});
