/**
 * The console view model and its reducer. Everything the UI shows derives
 * from folding feed records through applyRecord; there is no other state,
 * so reconnecting and replaying the feed rebuilds the exact same view.
 */

import type {
  FeedRecord,
  InputModeName,
  LatencySample,
  TranscriptRecord,
  TurnStateName,
  WorldSnapshot,
} from "./feed.js";

/** One tool invocation, built up from its call and completion records. */
export interface FunctionCard {
  callId: string;
  name: string;
  arguments: Record<string, unknown>;
  phase: "call" | "done";
  payload?: unknown;
  isError?: boolean;
  elapsedMs?: number;
  selfInitiated?: boolean;
}

export interface ConsoleViewModel {
  connected: boolean;
  turnState: TurnStateName;
  inputMode: InputModeName;
  tools: string[];
  transcript: TranscriptRecord[];
  /** Cards keyed by call_id, in call order. */
  cards: Record<string, FunctionCard>;
  cardOrder: string[];
  world: WorldSnapshot | null;
  latency: LatencySample[];
  notices: string[];
  lastError: string | null;
}

const MAX_NOTICES = 50;

export const initialViewModel: ConsoleViewModel = {
  connected: false,
  turnState: "idle",
  inputMode: "stt",
  tools: [],
  transcript: [],
  cards: {},
  cardOrder: [],
  world: null,
  latency: [],
  notices: [],
  lastError: null,
};

function applyTranscript(
  vm: ConsoleViewModel,
  record: TranscriptRecord,
): ConsoleViewModel {
  let next: ConsoleViewModel = { ...vm, transcript: [...vm.transcript, record] };
  const body = record.body;

  if (record.direction === "model" && record.kind === "function-card") {
    const callId = String(body.call_id);
    const card: FunctionCard = {
      callId,
      name: String(body.name),
      arguments: (body.arguments ?? {}) as Record<string, unknown>,
      phase: "call",
    };
    next = {
      ...next,
      cards: { ...next.cards, [callId]: card },
      cardOrder: next.cardOrder.includes(callId)
        ? next.cardOrder
        : [...next.cardOrder, callId],
    };
  } else if (record.direction === "system" && record.kind === "function-card") {
    const callId = String(body.call_id);
    // Self-initiated calls have no preceding model card; create one here.
    const prior = next.cards[callId];
    const card: FunctionCard = {
      callId,
      name: String(body.name),
      arguments: (body.arguments ?? prior?.arguments ?? {}) as Record<
        string,
        unknown
      >,
      phase: "done",
      payload: body.payload,
      isError: Boolean(body.is_error),
      elapsedMs: Number(body.elapsed_ms),
      selfInitiated: Boolean(body.self_initiated),
    };
    next = {
      ...next,
      cards: { ...next.cards, [callId]: card },
      cardOrder: next.cardOrder.includes(callId)
        ? next.cardOrder
        : [...next.cardOrder, callId],
    };
  } else if (record.direction === "system" && record.kind === "state-change") {
    if (typeof body.state === "string") {
      next = { ...next, turnState: body.state as TurnStateName };
    } else if (typeof body.input_mode === "string" && "tools" in body) {
      // Config (re)send: the session's mode and tool count changed.
      next = { ...next, inputMode: body.input_mode as InputModeName };
    }
  }
  return next;
}

/** Pure reducer: fold one feed record into the view model. */
export function applyRecord(
  vm: ConsoleViewModel,
  record: FeedRecord,
): ConsoleViewModel {
  switch (record.kind) {
    case "hello":
      return {
        ...vm,
        connected: true,
        inputMode: record.input_mode,
        tools: [...record.tools],
      };
    case "state":
      return { ...vm, turnState: record.state };
    case "transcript":
      return applyTranscript(vm, record.record);
    case "world":
      return { ...vm, world: record.snapshot };
    case "latency":
      return { ...vm, latency: [...vm.latency, record.sample] };
    case "info":
      return {
        ...vm,
        notices: [...vm.notices, record.message].slice(-MAX_NOTICES),
      };
    case "error":
      return { ...vm, lastError: record.message };
  }
}

/** Fold a whole feed (replay or fixture) from the initial model. */
export function applyFeed(records: FeedRecord[]): ConsoleViewModel {
  let vm = initialViewModel;
  for (const record of records) vm = applyRecord(vm, record);
  return vm;
}

/** Cards in call order, for rendering. */
export function orderedCards(vm: ConsoleViewModel): FunctionCard[] {
  const cards: FunctionCard[] = [];
  for (const id of vm.cardOrder) {
    const card = vm.cards[id];
    if (card) cards.push(card);
  }
  return cards;
}
