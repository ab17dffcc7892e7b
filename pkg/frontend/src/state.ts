// View state, slider plumbing, and the two ordering tools the UI loop leans
// on: a trailing-edge debouncer that collapses slider scrubs into one request
// per window, and a promise queue that applies network responses one at a
// time in arrival order.

import type { OrbitState } from "./camera";
import type { SliderValues } from "./api";
import type { ConnectionStatus } from "./frames";
import { vec3, type Vec3 } from "./vec";

export const SLIDER_RANGES: Record<keyof SliderValues, [number, number]> = {
  mu: [0.5, 8],
  phi: [1, 16],
  rho: [0, 10],
};

export const DEBOUNCE_MS = 50;

export type Selection =
  | { type: "saddle"; id: number }
  | { type: "surface"; point: Vec3 }
  | null;

export interface ViewState {
  orbit: OrbitState;
  vfovDeg: number;
  selection: Selection;
  sliders: SliderValues;
  /** Deformer currently driven by the sliders, if any. */
  activeDeformer: number | null;
  revision: number;
  connection: ConnectionStatus;
}

export function clampSliders(v: SliderValues): SliderValues {
  const c = (key: keyof SliderValues) =>
    Math.min(SLIDER_RANGES[key][1], Math.max(SLIDER_RANGES[key][0], v[key]));
  return { mu: c("mu"), phi: c("phi"), rho: c("rho") };
}

export function initialViewState(): ViewState {
  return {
    orbit: { azimuth: 0, elevation: 0, distance: 1.5, target: [0.5, 0.5, 0.5] },
    vfovDeg: 40,
    selection: null,
    sliders: { mu: 2.0, phi: 4.0, rho: 5.0 },
    activeDeformer: null,
    revision: 0,
    connection: "connecting",
  };
}

export function serializeViewState(s: ViewState): string {
  return JSON.stringify({
    orbit: s.orbit,
    vfovDeg: s.vfovDeg,
    selection: s.selection,
    sliders: s.sliders,
    activeDeformer: s.activeDeformer,
    revision: s.revision,
  });
}

/** Rebuild a view from its JSON form; values outside the ranges are clamped. */
export function restoreViewState(json: string): ViewState {
  const raw = JSON.parse(json);
  const orbit = raw.orbit ?? {};
  const base = initialViewState();
  let selection: Selection = null;
  if (raw.selection?.type === "saddle" && Number.isInteger(raw.selection.id)) {
    selection = { type: "saddle", id: raw.selection.id };
  } else if (raw.selection?.type === "surface" && Array.isArray(raw.selection.point)) {
    selection = { type: "surface", point: vec3(raw.selection.point) };
  }
  return {
    orbit: {
      azimuth: Number(orbit.azimuth ?? base.orbit.azimuth),
      elevation: Number(orbit.elevation ?? base.orbit.elevation),
      distance: Number(orbit.distance ?? base.orbit.distance),
      target: Array.isArray(orbit.target) ? vec3(orbit.target) : base.orbit.target,
    },
    vfovDeg: Number(raw.vfovDeg ?? base.vfovDeg),
    selection,
    sliders: clampSliders({ ...base.sliders, ...(raw.sliders ?? {}) }),
    activeDeformer: Number.isInteger(raw.activeDeformer) ? raw.activeDeformer : null,
    revision: Number.isInteger(raw.revision) ? raw.revision : 0,
    connection: "connecting",
  };
}

/**
 * Trailing-edge debouncer: rapid schedule() calls inside one window collapse
 * to the newest callback, and the window is anchored at the first call, so a
 * held slider still emits every `delayMs` instead of going silent.
 */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private queued: (() => void) | null = null;

  constructor(private delayMs: number = DEBOUNCE_MS) {}

  schedule(fn: () => void): void {
    this.queued = fn;
    if (this.timer === null) {
      this.timer = setTimeout(() => this.fire(), this.delayMs);
    }
  }

  /** Run the queued callback now (used on pointer-up so edits never lag). */
  flush(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.fire();
  }

  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.queued = null;
  }

  private fire(): void {
    this.timer = null;
    const fn = this.queued;
    this.queued = null;
    if (fn) fn();
  }
}

/** Serialized async queue: tasks run one at a time, in push order. */
export class EventQueue {
  private chain: Promise<unknown> = Promise.resolve();

  push<T>(task: () => Promise<T> | T): Promise<T> {
    const run = this.chain.then(task);
    this.chain = run.catch(() => undefined);
    return run;
  }
}
