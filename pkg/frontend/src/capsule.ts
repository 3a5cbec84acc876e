/**
 * The status capsule: one pill at the bottom of the screen showing the turn
 * state. Tapping it while the robot speaks is the barge-in gesture; the
 * click handler itself lives in main.ts so this stays render-only.
 */

import type { TurnStateName } from "./feed.js";

export interface CapsuleStyle {
  label: string;
  color: string;
  /** Whether tapping in this state does anything. */
  tappable: boolean;
}

export const CAPSULE_STYLES: Record<TurnStateName, CapsuleStyle> = {
  idle: { label: "idle", color: "#8a8a8a", tappable: false },
  listening: { label: "listening", color: "#2e9e44", tappable: false },
  thinking: { label: "thinking", color: "#c98a1f", tappable: false },
  speaking: { label: "speaking, tap to interrupt", color: "#2f6fd6", tappable: true },
};

export function renderCapsule(el: HTMLElement, state: TurnStateName): void {
  const style = CAPSULE_STYLES[state];
  el.textContent = style.label;
  el.style.backgroundColor = style.color;
  el.dataset.state = state;
  el.style.cursor = style.tappable ? "pointer" : "default";
}
