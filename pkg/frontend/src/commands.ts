/**
 * Command builders. Each returns the JSON object to send, or null when the
 * interaction is a no-op in the current state (so callers can bind UI
 * events directly without re-checking state themselves).
 */

import type {
  ConsoleCommand,
  InputModeName,
  TouchSensorName,
  TurnStateName,
} from "./feed.js";

/**
 * A capsule tap is a barge-in: it only means something while the robot is
 * speaking. Any other state returns null and no command is sent.
 */
export function tapCommand(state: TurnStateName): ConsoleCommand | null {
  return state === "speaking" ? { cmd: "tap" } : null;
}

export function sendTextCommand(text: string): ConsoleCommand | null {
  const trimmed = text.trim();
  return trimmed ? { cmd: "send_text", text: trimmed } : null;
}

export function simulateAudioCommand(
  durationMs: number,
  label?: string,
): ConsoleCommand | null {
  if (!Number.isInteger(durationMs) || durationMs <= 0) return null;
  return label
    ? { cmd: "simulate_audio", duration_ms: durationMs, text: label }
    : { cmd: "simulate_audio", duration_ms: durationMs };
}

export function touchCommand(sensor: TouchSensorName): ConsoleCommand {
  return { cmd: "touch", sensor };
}

export function setInputModeCommand(mode: InputModeName): ConsoleCommand {
  return { cmd: "set_input_mode", mode };
}

export function movePersonCommand(
  id: string,
  x: number,
  y: number,
): ConsoleCommand {
  return { cmd: "move_person", id, x, y };
}
