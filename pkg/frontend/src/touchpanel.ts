/** Touch sensor buttons: head, hands, bumpers. */

import { TOUCH_SENSORS, type TouchSensorName } from "./feed.js";

export function buildTouchPanel(
  container: HTMLElement,
  onTouch: (sensor: TouchSensorName) => void,
): void {
  for (const sensor of TOUCH_SENSORS) {
    const button = document.createElement("button");
    button.type = "button";
    button.textContent = sensor.replace("_", " ");
    button.addEventListener("click", () => onTouch(sensor));
    container.appendChild(button);
  }
}
