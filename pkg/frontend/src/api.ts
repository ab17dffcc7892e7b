// Typed client for the /v1 HTTP surface. Thin by design: methods return the
// service's JSON bodies unchanged so the display model is exactly what the
// session reported.

import { parseFrame } from "./frames";
import type {
  ChangedBox,
  DeformerRec,
  EditAck,
  Frame,
  FrameRequest,
  HistoryAck,
  MetaInfo,
  SaddleRec,
} from "./types";
import type { Vec3 } from "./vec";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SliderValues {
  mu: number;
  phi: number;
  rho: number;
}

async function raise(res: Response): Promise<never> {
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
    else if (body) detail = JSON.stringify(body.detail ?? body);
  } catch {
    // non-JSON error body, keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class ApiClient {
  private fetchImpl: FetchLike;

  constructor(
    public baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  /** ws:// address of the frame socket for this API base. */
  framesUrl(): string {
    return this.baseUrl.replace(/^http/, "ws") + "/v1/frames";
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (!res.ok) await raise(res);
    return (await res.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getMeta(): Promise<MetaInfo> {
    return this.json<MetaInfo>("/v1/meta");
  }

  getSaddles(): Promise<SaddleRec[]> {
    return this.json<SaddleRec[]>("/v1/saddles");
  }

  listDeformers(): Promise<DeformerRec[]> {
    return this.json<DeformerRec[]>("/v1/deformers");
  }

  addTopology(saddle: number, sliders: SliderValues): Promise<EditAck> {
    return this.post<EditAck>("/v1/deformers", { type: "topology", saddle, ...sliders });
  }

  addGeometry(
    point: Vec3,
    kind: "bulge" | "concavity",
    rho: number,
    radius?: number,
  ): Promise<EditAck> {
    return this.post<EditAck>("/v1/deformers", { type: kind, point: [...point], rho, radius });
  }

  retune(
    id: number,
    fields: Partial<SliderValues & { radius: number }>,
  ): Promise<EditAck> {
    return this.json<EditAck>(`/v1/deformers/${id}`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(fields),
    });
  }

  removeDeformer(id: number): Promise<{ revision: number; changed: ChangedBox }> {
    return this.json(`/v1/deformers/${id}`, { method: "DELETE" });
  }

  undo(): Promise<HistoryAck> {
    return this.post<HistoryAck>("/v1/undo", {});
  }

  redo(): Promise<HistoryAck> {
    return this.post<HistoryAck>("/v1/redo", {});
  }

  /** One frame over HTTP with the depth plane, for picking outside the socket loop. */
  async renderRaw(req: FrameRequest): Promise<Frame> {
    const res = await this.fetchImpl(this.baseUrl + "/v1/render", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ...req, depth: true, format: "raw" }),
    });
    if (!res.ok) await raise(res);
    return parseFrame(await res.arrayBuffer());
  }

  async exportObj(res: number): Promise<string> {
    const r = await this.fetchImpl(this.baseUrl + `/v1/export?res=${res}`);
    if (!r.ok) await raise(r);
    return r.text();
  }

  saveSession(path?: string): Promise<{ path: string; revision: number }> {
    return this.post("/v1/session/save", path ? { path } : {});
  }
}
