/**
 * Console entry point: one socket, one view model, re-render on every feed
 * record. The gateway replays the whole feed on (re)connect, so onOpen
 * resets the model and the fold rebuilds the exact same view.
 */

import { renderCapsule } from "./capsule.js";
import {
  movePersonCommand,
  sendTextCommand,
  setInputModeCommand,
  simulateAudioCommand,
  tapCommand,
  touchCommand,
} from "./commands.js";
import { toggleExpanded } from "./cards.js";
import type { ConsoleCommand } from "./feed.js";
import { renderSettings } from "./settings.js";
import { ConsoleSocket } from "./socket.js";
import { buildTouchPanel } from "./touchpanel.js";
import { renderTranscript } from "./transcriptdom.js";
import { applyRecord, initialViewModel, type ConsoleViewModel } from "./viewmodel.js";
import { WorldCanvas } from "./worldcanvas.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const params = new URLSearchParams(location.search);
const feedUrl = params.get("feed") ?? "ws://127.0.0.1:7802";

let vm: ConsoleViewModel = initialViewModel;
let expanded: ReadonlySet<string> = new Set();

const capsule = el<HTMLElement>("capsule");
const transcript = el<HTMLElement>("transcript");
const settings = el<HTMLElement>("settings");
const noticeBar = el<HTMLElement>("notices");
const worldCanvas = new WorldCanvas(
  el<HTMLCanvasElement>("world"),
  (id, x, y) => send(movePersonCommand(id, x, y)),
);

const socket = new ConsoleSocket(feedUrl, {
  onOpen: () => {
    vm = initialViewModel; // replay incoming: rebuild from scratch
    expanded = new Set();
    render();
  },
  onRecord: (record) => {
    vm = applyRecord(vm, record);
    render();
  },
  onClose: () => {
    vm = { ...vm, connected: false };
    render();
  },
});

function send(command: ConsoleCommand | null): void {
  if (command) socket.send(command);
}

function render(): void {
  renderCapsule(capsule, vm.turnState);
  capsule.classList.toggle("disconnected", !vm.connected);
  renderTranscript(transcript, vm, expanded, (callId) => {
    expanded = toggleExpanded(expanded, callId);
    render();
  });
  renderSettings(settings, vm, (mode) => send(setInputModeCommand(mode)));
  if (vm.world) worldCanvas.update(vm.world);
  const lastNotice = vm.notices[vm.notices.length - 1];
  noticeBar.textContent = vm.lastError
    ? `error: ${vm.lastError}`
    : lastNotice ?? "";
  noticeBar.classList.toggle("error", vm.lastError !== null);
}

capsule.addEventListener("click", () => send(tapCommand(vm.turnState)));

buildTouchPanel(el<HTMLElement>("touch-panel"), (sensor) =>
  send(touchCommand(sensor)),
);

const input = el<HTMLInputElement>("composer-text");
el<HTMLButtonElement>("composer-send").addEventListener("click", () => {
  const command = sendTextCommand(input.value);
  if (command) {
    socket.send(command);
    input.value = "";
  }
});
input.addEventListener("keydown", (e) => {
  if (e.key === "Enter") el<HTMLButtonElement>("composer-send").click();
});
el<HTMLButtonElement>("composer-audio").addEventListener("click", () => {
  const command = simulateAudioCommand(1200, input.value.trim() || undefined);
  if (command) {
    socket.send(command);
    input.value = "";
  }
});

render();
socket.connect();
