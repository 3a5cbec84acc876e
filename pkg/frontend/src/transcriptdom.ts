/**
 * Transcript pane rendering. Full re-render per update: a console session
 * is a few hundred rows, and rebuilding keeps the DOM a pure function of
 * the view model plus the expansion set.
 */

import { cardDetail, cardSummary } from "./cards.js";
import { buildTranscriptRows } from "./transcriptview.js";
import type { ConsoleViewModel } from "./viewmodel.js";

export function renderTranscript(
  container: HTMLElement,
  vm: ConsoleViewModel,
  expanded: ReadonlySet<string>,
  onToggleCard: (callId: string) => void,
): void {
  const stickToBottom =
    container.scrollTop + container.clientHeight >= container.scrollHeight - 8;
  container.textContent = "";

  for (const row of buildTranscriptRows(vm.transcript)) {
    const div = document.createElement("div");
    div.className = `row ${row.type}`;
    switch (row.type) {
      case "user-text":
        div.textContent = `you: ${row.text}`;
        div.title = `confidence ${row.confidence}`;
        break;
      case "user-audio":
        div.textContent = `you (audio, ${row.durationMs} ms)${row.label ? `: ${row.label}` : ""}`;
        break;
      case "user-interrupt":
        div.textContent = "tap: interrupted";
        break;
      case "model-text":
        div.textContent = `robot: ${row.text}`;
        if (row.dropped) div.classList.add("dropped");
        break;
      case "model-audio":
        div.textContent = `robot audio ${row.durationMs} ms`;
        if (row.dropped) div.classList.add("dropped");
        break;
      case "context":
        div.textContent = row.message;
        break;
      case "config":
        div.textContent = row.echo
          ? `config acknowledged (${row.inputMode})`
          : `input mode: ${row.inputMode}`;
        break;
      case "card": {
        const card = vm.cards[row.callId];
        if (!card) break;
        const summary = document.createElement("button");
        summary.type = "button";
        summary.className = "card-summary";
        summary.textContent = cardSummary(card);
        if (card.isError) summary.classList.add("error");
        summary.addEventListener("click", () => onToggleCard(card.callId));
        div.appendChild(summary);
        if (expanded.has(card.callId)) {
          const detail = document.createElement("dl");
          detail.className = "card-detail";
          for (const line of cardDetail(card)) {
            const dt = document.createElement("dt");
            dt.textContent = line.label;
            const dd = document.createElement("dd");
            dd.textContent = line.value;
            detail.append(dt, dd);
          }
          div.appendChild(detail);
        }
        break;
      }
    }
    container.appendChild(div);
  }
  if (stickToBottom) container.scrollTop = container.scrollHeight;
}
