// Frame socket client. The service replies to each JSON render request with
// one binary message: a 16-byte little-endian header (u32 revision, u32
// width, u32 height, f32 timing ms), the RGBA plane, and, when the request
// asked for it, a float32 depth plane. The client keeps at most one request
// in flight per socket and coalesces everything scheduled behind it into the
// newest request, so a scrubbed slider settles on the latest frame instead of
// replaying the whole gesture.

import type { Frame, FrameRequest } from "./types";

export const FRAME_HEADER_BYTES = 16;

export function parseFrame(buf: ArrayBuffer): Frame {
  if (buf.byteLength < FRAME_HEADER_BYTES) {
    throw new Error(`frame message too short: ${buf.byteLength} bytes`);
  }
  const view = new DataView(buf);
  const revision = view.getUint32(0, true);
  const width = view.getUint32(4, true);
  const height = view.getUint32(8, true);
  const timingMs = view.getFloat32(12, true);
  const npix = width * height;
  const rgbaBytes = npix * 4;
  const hasDepth = buf.byteLength === FRAME_HEADER_BYTES + rgbaBytes * 2;
  if (!hasDepth && buf.byteLength !== FRAME_HEADER_BYTES + rgbaBytes) {
    throw new Error(
      `frame message length ${buf.byteLength} does not match ${width}x${height}`,
    );
  }
  return {
    revision,
    width,
    height,
    timingMs,
    rgba: new Uint8Array(buf, FRAME_HEADER_BYTES, rgbaBytes),
    depth: hasDepth ? new Float32Array(buf, FRAME_HEADER_BYTES + rgbaBytes, npix) : null,
  };
}

// Narrow view of a WebSocket so tests can substitute the `ws` package or a
// scripted fake for the browser implementation. Handler params stay loose
// because the browser and `ws` disagree on the event types.
export interface SocketLike {
  binaryType: string;
  send(data: string): void;
  close(): void;
  /* eslint-disable @typescript-eslint/no-explicit-any */
  onopen: ((ev: any) => void) | null;
  /** Binary messages only; ev.data is an ArrayBuffer once binaryType is set. */
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
  /* eslint-enable @typescript-eslint/no-explicit-any */
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export class FrameSocket {
  onframe: (frame: Frame) => void = () => {};
  onstatus: (status: ConnectionStatus) => void = () => {};

  private sock: SocketLike | null = null;
  private open = false;
  private inflight: FrameRequest | null = null;
  private pending: FrameRequest | null = null;
  private lastShownRevision = -1;

  constructor(
    private url: string,
    private factory: SocketFactory,
  ) {}

  connect(): void {
    if (this.sock) return;
    this.onstatus("connecting");
    const sock = this.factory(this.url);
    sock.binaryType = "arraybuffer";
    sock.onopen = () => {
      this.open = true;
      this.onstatus("connected");
      const next = this.pending;
      this.pending = null;
      if (next) this.send(next);
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data as ArrayBuffer);
    sock.onclose = () => this.handleClose();
    sock.onerror = () => {};
    this.sock = sock;
  }

  get connected(): boolean {
    return this.open;
  }

  /**
   * Ask for a frame. While disconnected or busy the request is parked, and a
   * newer request replaces a parked one; the loop resumes from the parked
   * request after the in-flight frame arrives or the socket reconnects.
   */
  request(req: FrameRequest): void {
    if (!this.open || this.inflight) {
      this.pending = req;
      return;
    }
    this.send(req);
  }

  close(): void {
    const sock = this.sock;
    this.sock = null;
    this.open = false;
    this.inflight = null;
    if (sock) sock.close();
  }

  private send(req: FrameRequest): void {
    this.inflight = req;
    this.sock!.send(JSON.stringify(req));
  }

  private handleMessage(data: ArrayBuffer): void {
    this.inflight = null;
    const next = this.pending;
    this.pending = null;
    if (next && this.open) this.send(next);
    const frame = parseFrame(data);
    // Revisions only move forward; a frame older than one already shown is
    // stale output from before an edit landed and gets dropped.
    if (frame.revision < this.lastShownRevision) return;
    this.lastShownRevision = frame.revision;
    this.onframe(frame);
  }

  private handleClose(): void {
    // Keep the interrupted request so reconnect can resume the loop.
    if (this.inflight && !this.pending) this.pending = this.inflight;
    this.inflight = null;
    this.open = false;
    this.sock = null;
    this.onstatus("disconnected");
  }
}
