// Influence-box visualization: the support of a deformer is an open box in
// its own frame, reaching 2x each weight along the matching frame axis. The
// service reports the frame (columns are axes) and the weights; the UI only
// assembles corners and projects them.

import { projectPoint, type CameraPose } from "./camera";
import type { DeformerRec } from "./types";
import { add, scale, vec3, type Vec3 } from "./vec";

/** Corner order: bit k of the index gives the sign of frame axis k. */
export function supportCorners(d: DeformerRec): Vec3[] {
  const anchor = vec3(d.anchor);
  const axes: Vec3[] = [0, 1, 2].map((i) =>
    scale([d.frame[0][i], d.frame[1][i], d.frame[2][i]], 2 * d.weights[i]),
  );
  const corners: Vec3[] = [];
  for (let bits = 0; bits < 8; bits++) {
    let c = anchor;
    for (let k = 0; k < 3; k++) {
      c = add(c, scale(axes[k], bits & (1 << k) ? 1 : -1));
    }
    corners.push(c);
  }
  return corners;
}

/** The 12 box edges as corner-index pairs (corners differing in one bit). */
export const BOX_EDGES: ReadonlyArray<readonly [number, number]> = (() => {
  const edges: Array<[number, number]> = [];
  for (let a = 0; a < 8; a++) {
    for (const bit of [1, 2, 4]) {
      const b = a | bit;
      if (b !== a) edges.push([a, b]);
    }
  }
  return edges;
})();

export interface ScreenSegment {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Box edges in screen space; edges with an endpoint behind the camera drop. */
export function influenceSegments(
  d: DeformerRec,
  pose: CameraPose,
  width: number,
  height: number,
): ScreenSegment[] {
  const projected = supportCorners(d).map((c) => projectPoint(pose, c, width, height));
  const segments: ScreenSegment[] = [];
  for (const [a, b] of BOX_EDGES) {
    const pa = projected[a];
    const pb = projected[b];
    if (!pa.front || !pb.front) continue;
    segments.push({ x0: pa.x, y0: pa.y, x1: pb.x, y1: pb.y });
  }
  return segments;
}
