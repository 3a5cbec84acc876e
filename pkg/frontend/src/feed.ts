/**
 * Types for the gateway's console feed: one JSON object per WebSocket
 * message, replay first, then live records. Mirrors docs/console-protocol.md
 * in the gateway repository; the console consumes nothing else.
 */

export type TurnStateName = "idle" | "listening" | "thinking" | "speaking";
export type InputModeName = "stt" | "direct_audio";

export const TOUCH_SENSORS = [
  "head",
  "left_hand",
  "right_hand",
  "left_bumper",
  "right_bumper",
] as const;
export type TouchSensorName = (typeof TOUCH_SENSORS)[number];

/** One line of the session transcript. seq is 1-based and strictly increasing. */
export interface TranscriptRecord {
  seq: number;
  t_ms: number;
  direction: "user" | "model" | "system";
  kind: string;
  body: Record<string, unknown>;
}

export interface WorldRobot {
  x: number;
  y: number;
  theta: number;
}

export interface WorldGaze {
  x: number;
  y: number;
  z: number;
}

export interface WorldObstacle {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  name: string;
  elevation: number;
}

export interface WorldPerson {
  id: string;
  x: number;
  y: number;
  name: string;
}

export interface WorldHardware {
  charging_flap_open: boolean;
  battery_pct: number;
}

export interface WorldSnapshot {
  robot: WorldRobot;
  gaze: WorldGaze;
  obstacles: WorldObstacle[];
  persons: WorldPerson[];
  hardware: WorldHardware;
}

export interface LatencySample {
  turn_index: number;
  t_user_end: number;
  t_first_delta: number;
  latency_ms: number;
}

export type FeedRecord =
  | { kind: "hello"; input_mode: InputModeName; tools: string[] }
  | { kind: "state"; state: TurnStateName }
  | { kind: "transcript"; record: TranscriptRecord }
  | { kind: "world"; snapshot: WorldSnapshot }
  | { kind: "latency"; sample: LatencySample }
  | { kind: "info"; message: string }
  | { kind: "error"; message: string };

/** Commands the console may send. Invalid ones come back as error records. */
export type ConsoleCommand =
  | { cmd: "send_text"; text: string }
  | { cmd: "simulate_audio"; duration_ms: number; text?: string }
  | { cmd: "tap" }
  | { cmd: "touch"; sensor: TouchSensorName }
  | { cmd: "set_input_mode"; mode: InputModeName }
  | { cmd: "move_person"; id: string; x: number; y: number };

/**
 * Parse one wire message. Returns null for anything that is not a feed
 * record so an older console keeps working against a newer gateway.
 */
export function parseFeedRecord(raw: string): FeedRecord | null {
  let value: unknown;
  try {
    value = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof value !== "object" || value === null) return null;
  const kind = (value as { kind?: unknown }).kind;
  switch (kind) {
    case "hello":
    case "state":
    case "transcript":
    case "world":
    case "latency":
    case "info":
    case "error":
      return value as FeedRecord;
    default:
      return null;
  }
}
