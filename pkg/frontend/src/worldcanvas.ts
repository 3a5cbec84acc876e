/**
 * Top-down world view on a canvas: robot pose and gaze ray, obstacles,
 * persons. Persons can be dragged; releasing one emits a move so the
 * simulation (and every other console) follows.
 */

import type { WorldSnapshot } from "./feed.js";
import {
  fitViewport,
  hitTestPerson,
  screenToWorld,
  worldToScreen,
  type Viewport,
} from "./worldmath.js";

const PERSON_RADIUS_PX = 7;
const HIT_RADIUS_PX = 14;

export class WorldCanvas {
  private snapshot: WorldSnapshot | null = null;
  private viewport: Viewport | null = null;
  private dragId: string | null = null;
  private dragPos: { x: number; y: number } | null = null;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly onMovePerson: (id: string, x: number, y: number) => void,
  ) {
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
  }

  update(snapshot: WorldSnapshot): void {
    this.snapshot = snapshot;
    this.viewport = fitViewport(snapshot, this.canvas.width, this.canvas.height);
    this.draw();
  }

  private pointerDown(e: PointerEvent): void {
    if (!this.snapshot || !this.viewport) return;
    const { offsetX, offsetY } = e;
    const id = hitTestPerson(this.snapshot, this.viewport, offsetX, offsetY, HIT_RADIUS_PX);
    if (id) {
      this.dragId = id;
      this.canvas.setPointerCapture(e.pointerId);
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.dragId || !this.viewport) return;
    this.dragPos = screenToWorld(this.viewport, e.offsetX, e.offsetY);
    this.draw();
  }

  private pointerUp(e: PointerEvent): void {
    if (this.dragId && this.viewport) {
      const pos = screenToWorld(this.viewport, e.offsetX, e.offsetY);
      this.onMovePerson(this.dragId, round2(pos.x), round2(pos.y));
    }
    this.dragId = null;
    this.dragPos = null;
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.snapshot || !this.viewport) return;
    const { snapshot, viewport } = this;
    ctx.clearRect(0, 0, viewport.width, viewport.height);

    ctx.strokeStyle = "#d0d0d0";
    for (const o of snapshot.obstacles) {
      const a = worldToScreen(viewport, o.x0, o.y1);
      const b = worldToScreen(viewport, o.x1, o.y0);
      // elevated objects (signs, lamps) are outlines, floor obstacles solid
      if (o.elevation > 0) {
        ctx.strokeRect(a.sx, a.sy, b.sx - a.sx, b.sy - a.sy);
      } else {
        ctx.fillStyle = "#c4c4c4";
        ctx.fillRect(a.sx, a.sy, b.sx - a.sx, b.sy - a.sy);
      }
      if (o.name) {
        ctx.fillStyle = "#777";
        ctx.fillText(o.name, a.sx + 2, a.sy - 3);
      }
    }

    const robot = worldToScreen(viewport, snapshot.robot.x, snapshot.robot.y);
    const gaze = worldToScreen(viewport, snapshot.gaze.x, snapshot.gaze.y);
    ctx.strokeStyle = "#2f6fd6";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(robot.sx, robot.sy);
    ctx.lineTo(gaze.sx, gaze.sy);
    ctx.stroke();
    ctx.setLineDash([]);

    // robot: triangle pointing along theta
    const theta = snapshot.robot.theta;
    ctx.fillStyle = "#2f6fd6";
    ctx.beginPath();
    for (const [i, ang] of [0, 2.5, -2.5].entries()) {
      const r = i === 0 ? 12 : 8;
      const px = robot.sx + r * Math.cos(theta + ang);
      const py = robot.sy - r * Math.sin(theta + ang);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    }
    ctx.closePath();
    ctx.fill();

    ctx.fillStyle = "#b03a3a";
    for (const p of snapshot.persons) {
      const dragging = p.id === this.dragId && this.dragPos;
      const at = dragging
        ? worldToScreen(viewport, this.dragPos!.x, this.dragPos!.y)
        : worldToScreen(viewport, p.x, p.y);
      ctx.beginPath();
      ctx.arc(at.sx, at.sy, PERSON_RADIUS_PX, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillText(p.name || p.id, at.sx + 9, at.sy + 3);
      ctx.fillStyle = "#b03a3a";
    }
  }
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}
