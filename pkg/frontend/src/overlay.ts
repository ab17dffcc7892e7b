// Saddle markers in screen space: projection, occlusion dimming against the
// streamed depth plane, and click picking.

import { projectPoint, type CameraPose } from "./camera";
import type { Frame, SaddleRec } from "./types";
import { vec3 } from "./vec";

export interface Marker {
  id: number;
  cls: string;
  value: number;
  x: number;
  y: number;
  t: number;
  /** Surface sits clearly in front of the saddle along this pixel's ray. */
  occluded: boolean;
}

export const PICK_RADIUS_PX = 12;

// Depth slack before a marker dims; keeps saddles sitting within tracer
// tolerance of the surface from flickering.
const OCCLUSION_SLACK = 1e-3;

export function depthAt(frame: Frame, x: number, y: number): number {
  if (!frame.depth) return Infinity;
  const col = Math.min(frame.width - 1, Math.max(0, Math.floor(x)));
  const row = Math.min(frame.height - 1, Math.max(0, Math.floor(y)));
  return frame.depth[row * frame.width + col];
}

/**
 * Project saddles into the viewport. Markers behind the camera are omitted;
 * markers behind the rendered surface are kept but flagged for dimming.
 */
export function saddleMarkers(
  saddles: SaddleRec[],
  pose: CameraPose,
  width: number,
  height: number,
  frame: Frame | null,
): Marker[] {
  const markers: Marker[] = [];
  for (const s of saddles) {
    const p = projectPoint(pose, vec3(s.position), width, height);
    if (!p.front) continue;
    let occluded = false;
    if (frame && frame.depth) {
      // Depth is sampled in frame pixels, which may be coarser than the
      // viewport while a drag streams low-res frames.
      const fx = (p.x / width) * frame.width;
      const fy = (p.y / height) * frame.height;
      const d = depthAt(frame, fx, fy);
      occluded = Number.isFinite(d) && d + OCCLUSION_SLACK < p.t;
    }
    markers.push({ id: s.id, cls: s.class, value: s.value, x: p.x, y: p.y, t: p.t, occluded });
  }
  return markers;
}

/**
 * Nearest marker within the pick radius; exact distance ties resolve to the
 * lower id so a click between two markers is deterministic.
 */
export function pickMarker(
  markers: Marker[],
  x: number,
  y: number,
  radiusPx: number = PICK_RADIUS_PX,
): Marker | null {
  let best: Marker | null = null;
  let bestDist = Infinity;
  for (const m of markers) {
    const d = Math.hypot(m.x - x, m.y - y);
    if (d > radiusPx) continue;
    if (d < bestDist || (d === bestDist && best !== null && m.id < best.id)) {
      best = m;
      bestDist = d;
    }
  }
  return best;
}
