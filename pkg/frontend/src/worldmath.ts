/**
 * Pure geometry for the top-down world view: fit the scene into a canvas,
 * map between world and screen coordinates, and hit-test persons for
 * dragging. Rendering itself lives in worldcanvas.ts.
 */

import type { WorldSnapshot } from "./feed.js";

export interface Viewport {
  /** Pixels per world meter. */
  scale: number;
  /** Screen offset such that screen = (world - origin) * scale, y flipped. */
  originX: number;
  originY: number;
  width: number;
  height: number;
}

const MARGIN_PX = 24;
const MIN_SPAN_M = 4; // keep a sane zoom when the scene is tiny

/** Fit every obstacle, person, the robot, and the origin into the canvas. */
export function fitViewport(
  snapshot: WorldSnapshot,
  width: number,
  height: number,
): Viewport {
  let minX = Math.min(0, snapshot.robot.x);
  let maxX = Math.max(0, snapshot.robot.x);
  let minY = Math.min(0, snapshot.robot.y);
  let maxY = Math.max(0, snapshot.robot.y);
  for (const o of snapshot.obstacles) {
    minX = Math.min(minX, o.x0);
    maxX = Math.max(maxX, o.x1);
    minY = Math.min(minY, o.y0);
    maxY = Math.max(maxY, o.y1);
  }
  for (const p of snapshot.persons) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const spanX = Math.max(maxX - minX, MIN_SPAN_M);
  const spanY = Math.max(maxY - minY, MIN_SPAN_M);
  const scale = Math.min(
    (width - 2 * MARGIN_PX) / spanX,
    (height - 2 * MARGIN_PX) / spanY,
  );
  const centerX = (minX + maxX) / 2;
  const centerY = (minY + maxY) / 2;
  return {
    scale,
    originX: width / 2 - centerX * scale,
    originY: height / 2 + centerY * scale,
    width,
    height,
  };
}

/** World meters to screen pixels. Screen y grows downward. */
export function worldToScreen(
  vp: Viewport,
  x: number,
  y: number,
): { sx: number; sy: number } {
  return { sx: vp.originX + x * vp.scale, sy: vp.originY - y * vp.scale };
}

export function screenToWorld(
  vp: Viewport,
  sx: number,
  sy: number,
): { x: number; y: number } {
  return { x: (sx - vp.originX) / vp.scale, y: (vp.originY - sy) / vp.scale };
}

/** Person id under the pointer, or null. Nearest within radiusPx wins. */
export function hitTestPerson(
  snapshot: WorldSnapshot,
  vp: Viewport,
  sx: number,
  sy: number,
  radiusPx: number,
): string | null {
  let best: string | null = null;
  let bestDist = radiusPx;
  for (const p of snapshot.persons) {
    const { sx: px, sy: py } = worldToScreen(vp, p.x, p.y);
    const dist = Math.hypot(px - sx, py - sy);
    if (dist <= bestDist) {
      best = p.id;
      bestDist = dist;
    }
  }
  return best;
}
