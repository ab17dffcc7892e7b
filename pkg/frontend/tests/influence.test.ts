// The influence box is assembled from a deformer record's frame columns and
// weights; the fixture corners were computed service-side from the same
// record and cross-checked there against the session's own support box.

import { describe, expect, it } from "vitest";
import { poseFromJson } from "../src/camera";
import { BOX_EDGES, influenceSegments, supportCorners } from "../src/influence";
import type { DeformerRec } from "../src/types";
import { fixtureJson } from "./fixtures";

interface InfluenceFixture {
  deformer: DeformerRec;
  corners: number[][];
  aabb: { lo: number[]; hi: number[] };
}

const fx = fixtureJson<InfluenceFixture>("influence_box.json");

const FRONT = {
  position: [0.5, 0.5, -1.0],
  look_at: [0.5, 0.5, 0.5],
  up: [0.0, 1.0, 0.0],
  vfov_deg: 40.0,
};

describe("supportCorners", () => {
  it("matches the service-computed corners in bit order", () => {
    const corners = supportCorners(fx.deformer);
    expect(corners.length).toBe(8);
    for (let i = 0; i < 8; i++) {
      for (let k = 0; k < 3; k++) {
        expect(corners[i][k]).toBeCloseTo(fx.corners[i][k], 12);
      }
    }
  });

  it("spans exactly the reported axis-aligned support box", () => {
    const corners = supportCorners(fx.deformer);
    for (let k = 0; k < 3; k++) {
      const values = corners.map((c) => c[k]);
      expect(Math.min(...values)).toBeCloseTo(fx.aabb.lo[k], 12);
      expect(Math.max(...values)).toBeCloseTo(fx.aabb.hi[k], 12);
    }
  });

  it("degenerates to a point when the weights vanish", () => {
    const zero: DeformerRec = { ...fx.deformer, weights: [0, 0, 0] };
    for (const c of supportCorners(zero)) {
      expect(c).toEqual([fx.deformer.anchor[0], fx.deformer.anchor[1], fx.deformer.anchor[2]]);
    }
  });
});

describe("BOX_EDGES", () => {
  it("lists the 12 box edges, each flipping exactly one axis", () => {
    expect(BOX_EDGES.length).toBe(12);
    const seen = new Set<string>();
    for (const [a, b] of BOX_EDGES) {
      const diff = a ^ b;
      expect([1, 2, 4]).toContain(diff);
      seen.add(`${Math.min(a, b)}-${Math.max(a, b)}`);
    }
    expect(seen.size).toBe(12);
  });
});

describe("influenceSegments", () => {
  it("projects all 12 edges when the box faces the camera", () => {
    const segments = influenceSegments(fx.deformer, poseFromJson(FRONT), 512, 512);
    expect(segments.length).toBe(12);
    for (const s of segments) {
      for (const v of [s.x0, s.y0, s.x1, s.y1]) expect(Number.isFinite(v)).toBe(true);
    }
  });

  it("drops every edge when the box sits behind the camera", () => {
    const away = {
      ...FRONT,
      position: [0.5, 0.5, -1.0],
      look_at: [0.5, 0.5, -2.0], // looking away from the scene
    };
    expect(influenceSegments(fx.deformer, poseFromJson(away), 512, 512)).toEqual([]);
  });
});
