import { describe, expect, it } from "vitest";
import type { FeedRecord, TranscriptRecord } from "../src/feed.js";
import {
  applyFeed,
  applyRecord,
  initialViewModel,
  orderedCards,
} from "../src/viewmodel.js";

function transcript(
  seq: number,
  direction: TranscriptRecord["direction"],
  kind: string,
  body: Record<string, unknown>,
): FeedRecord {
  return { kind: "transcript", record: { seq, t_ms: seq * 10, direction, kind, body } };
}

describe("applyRecord", () => {
  it("hello sets mode, tools, and connectedness", () => {
    const vm = applyRecord(initialViewModel, {
      kind: "hello",
      input_mode: "direct_audio",
      tools: ["move_to", "get_weather"],
    });
    expect(vm.connected).toBe(true);
    expect(vm.inputMode).toBe("direct_audio");
    expect(vm.tools).toEqual(["move_to", "get_weather"]);
  });

  it("state records and state-change transcript records both move the capsule", () => {
    let vm = applyRecord(initialViewModel, { kind: "state", state: "listening" });
    expect(vm.turnState).toBe("listening");
    vm = applyRecord(vm, transcript(1, "system", "state-change", { state: "speaking" }));
    expect(vm.turnState).toBe("speaking");
  });

  it("a config resend updates the input mode", () => {
    const vm = applyRecord(
      initialViewModel,
      transcript(1, "system", "state-change", { input_mode: "direct_audio", tools: 7 }),
    );
    expect(vm.inputMode).toBe("direct_audio");
  });

  it("a config echo leaves the mode alone", () => {
    const vm = applyRecord(
      { ...initialViewModel, inputMode: "stt" },
      transcript(1, "system", "state-change", { config_echo: true, input_mode: "stt" }),
    );
    expect(vm.inputMode).toBe("stt");
  });

  it("does not mutate its input", () => {
    const before = JSON.stringify(initialViewModel);
    applyRecord(initialViewModel, { kind: "state", state: "thinking" });
    applyRecord(initialViewModel, transcript(1, "user", "text", { text: "hi", confidence: 1 }));
    expect(JSON.stringify(initialViewModel)).toBe(before);
  });

  it("world replaces the snapshot, latency appends", () => {
    const snapshot = {
      robot: { x: 0, y: 0, theta: 0 },
      gaze: { x: 1, y: 0, z: 1 },
      obstacles: [],
      persons: [],
      hardware: { charging_flap_open: false, battery_pct: 90 },
    };
    let vm = applyRecord(initialViewModel, { kind: "world", snapshot });
    expect(vm.world).toBe(snapshot);
    vm = applyRecord(vm, {
      kind: "latency",
      sample: { turn_index: 1, t_user_end: 100, t_first_delta: 350, latency_ms: 250 },
    });
    vm = applyRecord(vm, {
      kind: "latency",
      sample: { turn_index: 2, t_user_end: 900, t_first_delta: 1150, latency_ms: 250 },
    });
    expect(vm.latency.map((s) => s.turn_index)).toEqual([1, 2]);
  });

  it("errors land in lastError, infos in notices", () => {
    let vm = applyRecord(initialViewModel, { kind: "info", message: "rule fired" });
    vm = applyRecord(vm, { kind: "error", message: "bad command" });
    expect(vm.notices).toEqual(["rule fired"]);
    expect(vm.lastError).toBe("bad command");
  });
});

describe("function cards", () => {
  it("builds a card from the call and completes it in place", () => {
    const vm = applyFeed([
      transcript(1, "model", "function-card", {
        phase: "call",
        call_id: "call-1-1",
        name: "get_weather",
        arguments: { location: "zurich" },
      }),
      transcript(2, "system", "function-card", {
        call_id: "call-1-1",
        name: "get_weather",
        arguments: { location: "zurich" },
        payload: "clear sky",
        is_error: false,
        elapsed_ms: 12,
        self_initiated: false,
      }),
    ]);
    const cards = orderedCards(vm);
    expect(cards).toHaveLength(1);
    expect(cards[0]).toMatchObject({
      callId: "call-1-1",
      name: "get_weather",
      phase: "done",
      payload: "clear sky",
      isError: false,
      elapsedMs: 12,
    });
  });

  it("a self-initiated completion with no prior call still appears, in order", () => {
    const vm = applyFeed([
      transcript(1, "model", "function-card", {
        phase: "call",
        call_id: "call-1-1",
        name: "move_to",
        arguments: { x: 2, y: 0 },
      }),
      transcript(2, "system", "function-card", {
        call_id: "call-1-1",
        name: "move_to",
        arguments: { x: 2, y: 0 },
        payload: "movement blocked at (0.90, 0.00)",
        is_error: true,
        elapsed_ms: 40,
        self_initiated: false,
      }),
      transcript(3, "system", "function-card", {
        call_id: "self-1",
        name: "analyze_vision",
        arguments: { prompt: "what is ahead" },
        payload: "a crate",
        is_error: false,
        elapsed_ms: 8,
        self_initiated: true,
      }),
    ]);
    const cards = orderedCards(vm);
    expect(cards.map((c) => c.callId)).toEqual(["call-1-1", "self-1"]);
    expect(cards[0]?.isError).toBe(true);
    expect(cards[1]?.selfInitiated).toBe(true);
  });
});
