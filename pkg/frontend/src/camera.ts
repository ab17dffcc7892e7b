// Orbit camera and the pixel <-> ray <-> world maps. The ray construction
// mirrors the service renderer bit for bit (same basis fallback, same pixel
// centering, same normalization), so screen-space math done here lines up
// with the depth values the service streams back. A fixture test diffs the
// generated rays against service-side values to keep the two in lock step.

import { add, cross, dot, normalize, norm, scale, sub, vec3, type Vec3 } from "./vec";
import type { CameraJson } from "./types";

export interface OrbitState {
  azimuth: number; // radians, 0 puts the camera on the -z side of the target
  elevation: number; // radians, positive looks down from above
  distance: number;
  target: Vec3;
}

export interface CameraPose {
  position: Vec3;
  lookAt: Vec3;
  up: Vec3;
  vfovDeg: number;
}

export interface Basis {
  forward: Vec3;
  right: Vec3;
  trueUp: Vec3;
}

export const ELEVATION_LIMIT = (89 * Math.PI) / 180;
export const DISTANCE_RANGE: [number, number] = [0.2, 10];

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x));

export function orbitPose(o: OrbitState, vfovDeg = 40): CameraPose {
  const ce = Math.cos(o.elevation);
  const offset: Vec3 = [
    Math.sin(o.azimuth) * ce,
    Math.sin(o.elevation),
    -Math.cos(o.azimuth) * ce,
  ];
  return {
    position: add(o.target, scale(offset, o.distance)),
    lookAt: [...o.target],
    up: [0, 1, 0],
    vfovDeg,
  };
}

export function rotateOrbit(o: OrbitState, dAzimuth: number, dElevation: number): OrbitState {
  return {
    ...o,
    azimuth: o.azimuth + dAzimuth,
    elevation: clamp(o.elevation + dElevation, -ELEVATION_LIMIT, ELEVATION_LIMIT),
  };
}

export function zoomOrbit(o: OrbitState, factor: number): OrbitState {
  return { ...o, distance: clamp(o.distance * factor, DISTANCE_RANGE[0], DISTANCE_RANGE[1]) };
}

/** Shift the target in the view plane by a screen-pixel delta. */
export function panOrbit(
  o: OrbitState,
  dxPx: number,
  dyPx: number,
  heightPx: number,
  vfovDeg = 40,
): OrbitState {
  const pose = orbitPose(o, vfovDeg);
  const { right, trueUp } = cameraBasis(pose);
  const worldPerPixel = (2 * Math.tan((vfovDeg * Math.PI) / 360) * o.distance) / heightPx;
  const shift = add(scale(right, -dxPx * worldPerPixel), scale(trueUp, dyPx * worldPerPixel));
  return { ...o, target: add(o.target, shift) };
}

export function cameraBasis(pose: CameraPose): Basis {
  let forward = sub(pose.lookAt, pose.position);
  const fn = norm(forward);
  if (fn === 0) throw new Error("camera position and look-at coincide");
  forward = scale(forward, 1 / fn);
  let up = normalize(pose.up);
  if (Math.abs(dot(forward, up)) > 1 - 1e-9) {
    up = Math.abs(forward[2]) < 0.9 ? [0, 0, 1] : [0, 1, 0];
  }
  const right = normalize(cross(forward, up));
  const trueUp = cross(right, forward);
  return { forward, right, trueUp };
}

/**
 * Ray through continuous screen coordinates (sx, sy), origin at the image's
 * top-left corner, pixel (i, j) centered at (i + 0.5, j + 0.5).
 */
export function rayThrough(
  pose: CameraPose,
  sx: number,
  sy: number,
  width: number,
  height: number,
): Vec3 {
  const { forward, right, trueUp } = cameraBasis(pose);
  const tanHalf = Math.tan((pose.vfovDeg * Math.PI) / 360);
  const aspect = width / height;
  const x = ((sx / width) * 2 - 1) * tanHalf * aspect;
  const y = (1 - (sy / height) * 2) * tanHalf;
  return normalize(add(forward, add(scale(right, x), scale(trueUp, y))));
}

export interface Projection {
  x: number;
  y: number;
  /** Euclidean camera-to-point distance, comparable with streamed depth. */
  t: number;
  front: boolean;
}

export function projectPoint(
  pose: CameraPose,
  point: Vec3,
  width: number,
  height: number,
): Projection {
  const { forward, right, trueUp } = cameraBasis(pose);
  const rel = sub(point, pose.position);
  const f = dot(rel, forward);
  const t = norm(rel);
  if (f <= 0) return { x: NaN, y: NaN, t, front: false };
  const tanHalf = Math.tan((pose.vfovDeg * Math.PI) / 360);
  const aspect = width / height;
  const xn = dot(rel, right) / f / (tanHalf * aspect);
  const yn = dot(rel, trueUp) / f / tanHalf;
  return { x: ((xn + 1) / 2) * width, y: ((1 - yn) / 2) * height, t, front: true };
}

export function unprojectPixel(
  pose: CameraPose,
  sx: number,
  sy: number,
  width: number,
  height: number,
  t: number,
): Vec3 {
  return add(pose.position, scale(rayThrough(pose, sx, sy, width, height), t));
}

export function poseToJson(pose: CameraPose): CameraJson {
  return {
    position: [...pose.position],
    look_at: [...pose.lookAt],
    up: [...pose.up],
    vfov_deg: pose.vfovDeg,
  };
}

export function poseFromJson(cam: CameraJson): CameraPose {
  return {
    position: vec3(cam.position),
    lookAt: vec3(cam.look_at),
    up: vec3(cam.up),
    vfovDeg: cam.vfov_deg,
  };
}
