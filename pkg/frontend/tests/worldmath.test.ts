import { describe, expect, it } from "vitest";
import type { WorldSnapshot } from "../src/feed.js";
import {
  fitViewport,
  hitTestPerson,
  screenToWorld,
  worldToScreen,
} from "../src/worldmath.js";

const snapshot: WorldSnapshot = {
  robot: { x: 0, y: 0, theta: 0 },
  gaze: { x: 1, y: 0, z: 1.2 },
  obstacles: [{ x0: 1.5, y0: -0.3, x1: 2.1, y1: 0.3, name: "crate", elevation: 0 }],
  persons: [
    { id: "p1", x: 4, y: 1, name: "Ada" },
    { id: "p2", x: -2, y: -1, name: "" },
  ],
  hardware: { charging_flap_open: false, battery_pct: 87 },
};

describe("viewport", () => {
  it("round-trips world and screen coordinates", () => {
    const vp = fitViewport(snapshot, 320, 240);
    for (const [x, y] of [[0, 0], [4, 1], [-2, -1], [2.1, 0.3]]) {
      const { sx, sy } = worldToScreen(vp, x!, y!);
      const back = screenToWorld(vp, sx, sy);
      expect(back.x).toBeCloseTo(x!, 9);
      expect(back.y).toBeCloseTo(y!, 9);
    }
  });

  it("keeps the whole scene on the canvas", () => {
    const vp = fitViewport(snapshot, 320, 240);
    const points = [
      [snapshot.robot.x, snapshot.robot.y],
      ...snapshot.persons.map((p) => [p.x, p.y]),
      ...snapshot.obstacles.flatMap((o) => [
        [o.x0, o.y0],
        [o.x1, o.y1],
      ]),
    ];
    for (const [x, y] of points) {
      const { sx, sy } = worldToScreen(vp, x!, y!);
      expect(sx).toBeGreaterThanOrEqual(0);
      expect(sx).toBeLessThanOrEqual(320);
      expect(sy).toBeGreaterThanOrEqual(0);
      expect(sy).toBeLessThanOrEqual(240);
    }
  });

  it("screen y grows downward while world y grows upward", () => {
    const vp = fitViewport(snapshot, 320, 240);
    const low = worldToScreen(vp, 0, -1);
    const high = worldToScreen(vp, 0, 1);
    expect(high.sy).toBeLessThan(low.sy);
  });
});

describe("hitTestPerson", () => {
  it("finds the person under the pointer and nothing elsewhere", () => {
    const vp = fitViewport(snapshot, 320, 240);
    const ada = worldToScreen(vp, 4, 1);
    expect(hitTestPerson(snapshot, vp, ada.sx + 3, ada.sy - 2, 14)).toBe("p1");
    const empty = worldToScreen(vp, 0.5, -1.4);
    expect(hitTestPerson(snapshot, vp, empty.sx, empty.sy, 14)).toBeNull();
  });

  it("prefers the nearest of two overlapping persons", () => {
    const crowded: WorldSnapshot = {
      ...snapshot,
      persons: [
        { id: "a", x: 1, y: 1, name: "" },
        { id: "b", x: 1.05, y: 1, name: "" },
      ],
    };
    const vp = fitViewport(crowded, 320, 240);
    const nearA = worldToScreen(vp, 0.99, 1);
    expect(hitTestPerson(crowded, vp, nearA.sx, nearA.sy, 20)).toBe("a");
  });
});
