// Surface picking: turn a clicked pixel plus the frame's depth plane into a
// world-space anchor point for geometry edits.

import { unprojectPixel, type CameraPose } from "./camera";
import type { Frame } from "./types";
import type { Vec3 } from "./vec";

/**
 * World point under a viewport click, or null on background/missing depth.
 * The depth value was traced along the pixel-center ray, so the unprojection
 * uses the pixel center too, not the sub-pixel click position.
 */
export function surfacePick(
  frame: Frame,
  pose: CameraPose,
  viewX: number,
  viewY: number,
  viewWidth: number,
  viewHeight: number,
): Vec3 | null {
  if (!frame.depth) return null;
  const col = Math.floor((viewX / viewWidth) * frame.width);
  const row = Math.floor((viewY / viewHeight) * frame.height);
  if (col < 0 || col >= frame.width || row < 0 || row >= frame.height) return null;
  const t = frame.depth[row * frame.width + col];
  if (!Number.isFinite(t)) return null;
  return unprojectPixel(pose, col + 0.5, row + 0.5, frame.width, frame.height, t);
}
