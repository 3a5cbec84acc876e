/** Settings panel: input-mode toggle, registered tools, latency table. */

import type { InputModeName } from "./feed.js";
import type { ConsoleViewModel } from "./viewmodel.js";

export function renderSettings(
  container: HTMLElement,
  vm: ConsoleViewModel,
  onSetMode: (mode: InputModeName) => void,
): void {
  container.textContent = "";

  const modeRow = document.createElement("div");
  modeRow.className = "mode-row";
  for (const mode of ["stt", "direct_audio"] as InputModeName[]) {
    const button = document.createElement("button");
    button.type = "button";
    button.textContent = mode;
    if (mode === vm.inputMode) button.classList.add("active");
    else button.addEventListener("click", () => onSetMode(mode));
    modeRow.appendChild(button);
  }
  container.appendChild(modeRow);

  const tools = document.createElement("div");
  tools.className = "tool-list";
  tools.textContent = vm.tools.length
    ? `tools: ${vm.tools.join(", ")}`
    : "tools: (none yet)";
  container.appendChild(tools);

  const table = document.createElement("table");
  table.className = "latency-table";
  const head = table.insertRow();
  for (const label of ["turn", "latency ms"]) {
    const th = document.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }
  for (const sample of vm.latency) {
    const row = table.insertRow();
    row.insertCell().textContent = String(sample.turn_index);
    row.insertCell().textContent = String(sample.latency_ms);
  }
  container.appendChild(table);
}
