// Shapes of the /v1 JSON payloads. The UI treats these as opaque facts: every
// displayed number is read from one of these records, never recomputed.

export interface MetaInfo {
  n: number;
  w: number;
  margin: number;
  normalized: boolean;
  mesh: { label: string; sha256: string };
  revision: number;
  saddle_count: number;
  deformer_count: number;
  fit: {
    residual: number;
    iterations: number;
    converged: boolean;
    fit_seconds: number;
    search_seconds: number;
  };
  history: { undo: number; redo: number };
}

export interface SaddleRec {
  id: number;
  position: number[];
  value: number;
  grad_norm: number;
  eigenvalues: number[];
  eigenvectors: number[][];
  class: string;
}

export interface DeformerRec {
  id: number;
  kind: string; // topology | bulge | concavity
  anchor: number[];
  frame: number[][]; // columns are the deformer axes
  weights: number[];
  beta: number;
  anchor_value: number;
  frame_eigenvalues: number[];
  params: Record<string, number>;
  mode: string;
}

export interface ChangedBox {
  lo: number[];
  hi: number[];
}

export interface EditAck {
  id?: number;
  revision: number;
  changed: ChangedBox;
}

export interface HistoryAck {
  ok: boolean;
  revision: number;
}

export interface CameraJson {
  position: number[];
  look_at: number[];
  up: number[];
  vfov_deg: number;
}

export interface FrameRequest {
  camera: CameraJson;
  width: number;
  height: number;
  depth?: boolean;
  max_steps?: number;
  step_scale?: number;
  hit_eps?: number;
  max_distance?: number;
}

export interface Frame {
  revision: number;
  width: number;
  height: number;
  timingMs: number;
  rgba: Uint8Array;
  depth: Float32Array | null;
}
