// Surface picking against a rendered analytic sphere: the fixture frame's
// depth plane came from the service, the expected world points were computed
// on the service side from its own rays, and the sphere itself provides the
// geometric error bound.

import { describe, expect, it } from "vitest";
import { poseFromJson } from "../src/camera";
import { parseFrame } from "../src/frames";
import { surfacePick } from "../src/pick";
import type { Frame } from "../src/types";
import { norm, sub, vec3 } from "../src/vec";
import { fixtureBytes, fixtureJson } from "./fixtures";

interface PickFixture {
  camera: { position: number[]; look_at: number[]; up: number[]; vfov_deg: number };
  width: number;
  height: number;
  sphere: { center: number[]; radius: number };
  hit_eps: number;
  picks: Array<{ pixel: number[]; t32: number; world: number[] }>;
  background: number[];
}

const fx = fixtureJson<PickFixture>("sphere_pick.json");
const frame = parseFrame(fixtureBytes("sphere_frame.bin"));
const pose = poseFromJson(fx.camera);

describe("surfacePick", () => {
  it("reconstructs the service-side world points bit-for-bit close", () => {
    for (const pick of fx.picks) {
      const [col, row] = pick.pixel;
      const p = surfacePick(frame, pose, col + 0.5, row + 0.5, fx.width, fx.height);
      expect(p).not.toBeNull();
      expect(norm(sub(p!, vec3(pick.world)))).toBeLessThan(1e-9);
    }
  });

  it("lands within 2x hit_eps of the analytic sphere", () => {
    const center = vec3(fx.sphere.center);
    for (const pick of fx.picks) {
      const [col, row] = pick.pixel;
      const p = surfacePick(frame, pose, col + 0.5, row + 0.5, fx.width, fx.height)!;
      const gap = Math.abs(norm(sub(p, center)) - fx.sphere.radius);
      expect(gap).toBeLessThan(2 * fx.hit_eps);
    }
  });

  it("maps viewport clicks onto frame pixels at any scale", () => {
    const [col, row] = fx.picks[0].pixel;
    const scale = 512 / fx.width;
    const atScale = surfacePick(
      frame,
      pose,
      (col + 0.5) * scale,
      (row + 0.5) * scale,
      512,
      512,
    );
    const native = surfacePick(frame, pose, col + 0.5, row + 0.5, fx.width, fx.height);
    expect(atScale).toEqual(native);
  });

  it("returns null on background, missing depth, and out-of-range clicks", () => {
    const [bc, br] = fx.background;
    expect(surfacePick(frame, pose, bc + 0.5, br + 0.5, fx.width, fx.height)).toBeNull();

    const depthless: Frame = { ...frame, depth: null };
    expect(surfacePick(depthless, pose, 32, 32, fx.width, fx.height)).toBeNull();

    expect(surfacePick(frame, pose, -1, 5, fx.width, fx.height)).toBeNull();
    expect(surfacePick(frame, pose, 5, fx.height + 3, fx.width, fx.height)).toBeNull();
  });
});
