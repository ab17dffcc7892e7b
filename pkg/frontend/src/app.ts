// Wires the tested modules to the DOM: viewport canvases, orbit input,
// saddle/surface picking, slider-driven retunes, the deformer stack, and
// history/export/save controls. Field math stays on the server; this file
// only moves JSON records and pixels around.

import { ApiClient, ApiError, type SliderValues } from "./api";
import {
  orbitPose,
  panOrbit,
  poseToJson,
  rotateOrbit,
  zoomOrbit,
  type CameraPose,
} from "./camera";
import { FrameSocket, type SocketFactory } from "./frames";
import { influenceSegments } from "./influence";
import { pickMarker, saddleMarkers, type Marker } from "./overlay";
import { surfacePick } from "./pick";
import {
  clampSliders,
  Debouncer,
  EventQueue,
  initialViewState,
  restoreViewState,
  serializeViewState,
  SLIDER_RANGES,
  type ViewState,
} from "./state";
import type { DeformerRec, Frame, FrameRequest, SaddleRec } from "./types";

const DRAG_RES = 128;
const REST_RES = 512;
const VIEW_SIZE = 512;
const FLIP_RHO = 27 / 8; // slider tick where a topology deformer crosses zero
const STORAGE_KEY = "morphield-view";

export class App {
  state: ViewState;
  saddles: SaddleRec[] = [];
  deformers: DeformerRec[] = [];
  lastFrame: Frame | null = null;

  private markers: Marker[] = [];
  private queue = new EventQueue();
  private debounce = new Debouncer();
  private sock: FrameSocket;
  private frameCanvas: HTMLCanvasElement;
  private overlayCanvas: HTMLCanvasElement;
  private scratch = document.createElement("canvas");
  private statusEl: HTMLElement;
  private infoEl: HTMLElement;
  private stackEl: HTMLElement;
  private sliderEls = {} as Record<keyof SliderValues, HTMLInputElement>;
  private dragging = false;
  private moved = false;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    socketFactory: SocketFactory,
  ) {
    const stored = localStorage.getItem(STORAGE_KEY);
    this.state = stored ? restoreViewState(stored) : initialViewState();
    this.buildDom();
    this.frameCanvas = this.root.querySelector("#frame") as HTMLCanvasElement;
    this.overlayCanvas = this.root.querySelector("#overlay") as HTMLCanvasElement;
    this.statusEl = this.root.querySelector("#status") as HTMLElement;
    this.infoEl = this.root.querySelector("#info") as HTMLElement;
    this.stackEl = this.root.querySelector("#stack") as HTMLElement;
    this.sock = new FrameSocket(api.framesUrl(), socketFactory);
    this.sock.onframe = (f) => this.showFrame(f);
    this.sock.onstatus = (s) => {
      this.state.connection = s;
      this.statusEl.dataset.state = s;
      this.statusEl.textContent = s;
      if (s === "connected") this.requestFrame(REST_RES);
      if (s === "disconnected") setTimeout(() => this.sock.connect(), 1000);
    };
    this.bindInput();
  }

  async start(): Promise<void> {
    this.sock.connect();
    await this.queue.push(async () => {
      const meta = await this.api.getMeta();
      this.state.revision = meta.revision;
      this.saddles = await this.api.getSaddles();
      this.deformers = await this.api.listDeformers();
      this.renderStack();
      this.info(
        `${meta.mesh.label}: grid ${meta.n}, ${meta.saddle_count} saddles, ` +
          `fit residual ${meta.fit.residual.toExponential(2)}`,
      );
    });
  }

  pose(): CameraPose {
    return orbitPose(this.state.orbit, this.state.vfovDeg);
  }

  private requestFrame(res: number): void {
    const req: FrameRequest = {
      camera: poseToJson(this.pose()),
      width: res,
      height: res,
      depth: true,
    };
    this.sock.request(req);
  }

  private showFrame(frame: Frame): void {
    this.lastFrame = frame;
    this.state.revision = Math.max(this.state.revision, frame.revision);
    this.scratch.width = frame.width;
    this.scratch.height = frame.height;
    const sctx = this.scratch.getContext("2d")!;
    // copy out of the message buffer; ImageData wants a plain ArrayBuffer view
    sctx.putImageData(
      new ImageData(new Uint8ClampedArray(frame.rgba), frame.width, frame.height),
      0,
      0,
    );
    const ctx = this.frameCanvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = true;
    ctx.clearRect(0, 0, VIEW_SIZE, VIEW_SIZE);
    ctx.drawImage(this.scratch, 0, 0, VIEW_SIZE, VIEW_SIZE);
    this.drawOverlay();
    this.persist();
  }

  private drawOverlay(): void {
    const ctx = this.overlayCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, VIEW_SIZE, VIEW_SIZE);
    const pose = this.pose();
    this.markers = saddleMarkers(this.saddles, pose, VIEW_SIZE, VIEW_SIZE, this.lastFrame);

    const active = this.deformers.find((d) => d.id === this.state.activeDeformer);
    if (active) {
      ctx.strokeStyle = "rgba(80, 220, 120, 0.9)";
      ctx.lineWidth = 1.5;
      for (const s of influenceSegments(active, pose, VIEW_SIZE, VIEW_SIZE)) {
        ctx.beginPath();
        ctx.moveTo(s.x0, s.y0);
        ctx.lineTo(s.x1, s.y1);
        ctx.stroke();
      }
    }

    for (const m of this.markers) {
      const selected =
        this.state.selection?.type === "saddle" && this.state.selection.id === m.id;
      ctx.beginPath();
      ctx.arc(m.x, m.y, selected ? 8 : 6, 0, 2 * Math.PI);
      ctx.fillStyle = m.occluded ? "rgba(200, 60, 60, 0.35)" : "rgba(220, 50, 50, 0.9)";
      ctx.fill();
      if (selected) {
        ctx.strokeStyle = "#fff";
        ctx.lineWidth = 2;
        ctx.stroke();
      }
    }

    if (this.state.selection?.type === "surface") {
      const p = this.state.selection.point;
      const proj = saddleMarkers(
        [{ id: -1, position: [...p], value: 0, grad_norm: 0, eigenvalues: [], eigenvectors: [], class: "pick" }],
        pose,
        VIEW_SIZE,
        VIEW_SIZE,
        null,
      )[0];
      if (proj) {
        ctx.strokeStyle = "#ffd24a";
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.moveTo(proj.x - 7, proj.y);
        ctx.lineTo(proj.x + 7, proj.y);
        ctx.moveTo(proj.x, proj.y - 7);
        ctx.lineTo(proj.x, proj.y + 7);
        ctx.stroke();
      }
    }
  }

  private bindInput(): void {
    const canvas = this.overlayCanvas;
    let lastX = 0;
    let lastY = 0;

    canvas.addEventListener("pointerdown", (ev) => {
      this.dragging = true;
      this.moved = false;
      lastX = ev.offsetX;
      lastY = ev.offsetY;
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (!this.dragging) return;
      const dx = ev.offsetX - lastX;
      const dy = ev.offsetY - lastY;
      if (Math.abs(dx) + Math.abs(dy) < 1) return;
      this.moved = true;
      lastX = ev.offsetX;
      lastY = ev.offsetY;
      if (ev.shiftKey) {
        this.state.orbit = panOrbit(this.state.orbit, dx, dy, VIEW_SIZE, this.state.vfovDeg);
      } else {
        this.state.orbit = rotateOrbit(this.state.orbit, dx * 0.008, dy * 0.008);
      }
      this.requestFrame(DRAG_RES);
    });
    canvas.addEventListener("pointerup", (ev) => {
      canvas.releasePointerCapture(ev.pointerId);
      const wasDrag = this.moved;
      this.dragging = false;
      this.moved = false;
      if (wasDrag) {
        this.requestFrame(REST_RES);
      } else {
        this.handleClick(ev.offsetX, ev.offsetY);
      }
    });
    canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.state.orbit = zoomOrbit(this.state.orbit, Math.exp(ev.deltaY * 0.001));
      this.requestFrame(DRAG_RES);
      this.debounce.schedule(() => this.requestFrame(REST_RES));
    });

    for (const key of ["mu", "phi", "rho"] as const) {
      const el = this.root.querySelector(`#slider-${key}`) as HTMLInputElement;
      this.sliderEls[key] = el;
      el.min = String(SLIDER_RANGES[key][0]);
      el.max = String(SLIDER_RANGES[key][1]);
      el.step = "0.025";
      el.value = String(this.state.sliders[key]);
      el.addEventListener("input", () => {
        this.state.sliders = clampSliders({
          ...this.state.sliders,
          [key]: Number(el.value),
        });
        this.updateSliderLabels();
        if (this.state.activeDeformer !== null) {
          const id = this.state.activeDeformer;
          const fields = { ...this.state.sliders };
          this.debounce.schedule(() => this.applyEdit(() => this.api.retune(id, fields)));
        }
      });
      el.addEventListener("change", () => this.debounce.flush());
    }
    this.updateSliderLabels();

    this.button("#btn-flip", () => {
      if (this.state.selection?.type !== "saddle") return;
      const saddle = this.state.selection.id;
      this.applyEdit(() => this.api.addTopology(saddle, this.state.sliders), true);
    });
    this.button("#btn-bulge", () => this.addGeometry("bulge"));
    this.button("#btn-dent", () => this.addGeometry("concavity"));
    this.button("#btn-undo", () => this.applyHistory(() => this.api.undo()));
    this.button("#btn-redo", () => this.applyHistory(() => this.api.redo()));
    this.button("#btn-export", () => this.exportMesh());
    this.button("#btn-save", () =>
      this.queue.push(async () => {
        try {
          const r = await this.api.saveSession();
          this.info(`saved to ${r.path}`);
        } catch (e) {
          this.info(e instanceof ApiError ? e.message : String(e));
        }
      }),
    );
  }

  private button(sel: string, fn: () => void): void {
    (this.root.querySelector(sel) as HTMLButtonElement).addEventListener("click", fn);
  }

  private handleClick(x: number, y: number): void {
    const hit = pickMarker(this.markers, x, y);
    if (hit) {
      this.state.selection = { type: "saddle", id: hit.id };
      const rec = this.saddles.find((s) => s.id === hit.id)!;
      this.info(
        `${rec.class} #${rec.id}: F(s)=${rec.value.toPrecision(4)}, ` +
          `eigenvalues [${rec.eigenvalues.map((e) => e.toPrecision(3)).join(", ")}], ` +
          `flip at ρ=${FLIP_RHO}`,
      );
    } else if (this.lastFrame) {
      const point = surfacePick(this.lastFrame, this.pose(), x, y, VIEW_SIZE, VIEW_SIZE);
      if (point) {
        this.state.selection = { type: "surface", point };
        this.info(`surface anchor at [${point.map((v) => v.toFixed(4)).join(", ")}]`);
      } else {
        this.state.selection = null;
        this.info("background: nothing to pick there");
      }
    }
    this.drawOverlay();
    this.persist();
  }

  private addGeometry(kind: "bulge" | "concavity"): void {
    if (this.state.selection?.type !== "surface") {
      this.info("pick a surface point first");
      return;
    }
    const point = this.state.selection.point;
    this.applyEdit(() => this.api.addGeometry(point, kind, this.state.sliders.rho), true);
  }

  private applyEdit(
    call: () => Promise<{ id?: number; revision: number }>,
    activate = false,
  ): Promise<void> {
    return this.queue.push(async () => {
      try {
        const ack = await call();
        this.state.revision = Math.max(this.state.revision, ack.revision);
        if (activate && ack.id !== undefined) this.state.activeDeformer = ack.id;
        this.deformers = await this.api.listDeformers();
        this.renderStack();
        this.requestFrame(this.dragging ? DRAG_RES : REST_RES);
      } catch (e) {
        this.info(e instanceof ApiError ? e.message : String(e));
      }
    });
  }

  private applyHistory(call: () => Promise<{ ok: boolean; revision: number }>): void {
    this.queue.push(async () => {
      const ack = await call();
      this.state.revision = Math.max(this.state.revision, ack.revision);
      this.deformers = await this.api.listDeformers();
      if (
        this.state.activeDeformer !== null &&
        !this.deformers.some((d) => d.id === this.state.activeDeformer)
      ) {
        this.state.activeDeformer = null;
      }
      this.renderStack();
      if (ack.ok) this.requestFrame(REST_RES);
    });
  }

  private exportMesh(): void {
    this.queue.push(async () => {
      try {
        const text = await this.api.exportObj(128);
        const blob = new Blob([text], { type: "text/plain" });
        const a = document.createElement("a");
        a.href = URL.createObjectURL(blob);
        a.download = "edited.obj";
        a.click();
        URL.revokeObjectURL(a.href);
      } catch (e) {
        this.info(e instanceof ApiError ? e.message : String(e));
      }
    });
  }

  private renderStack(): void {
    this.stackEl.innerHTML = "";
    for (const d of this.deformers) {
      const li = document.createElement("li");
      if (d.id === this.state.activeDeformer) li.classList.add("active");
      const params = Object.entries(d.params)
        .map(([k, v]) => `${k}=${typeof v === "number" ? v.toPrecision(3) : v}`)
        .join(" ");
      const label = document.createElement("span");
      label.textContent = `#${d.id} ${d.kind} ${params}`;
      label.addEventListener("click", () => {
        this.state.activeDeformer = d.id;
        if (typeof d.params.mu === "number") {
          this.state.sliders = clampSliders({
            mu: d.params.mu ?? this.state.sliders.mu,
            phi: d.params.phi ?? this.state.sliders.phi,
            rho: d.params.rho ?? this.state.sliders.rho,
          });
          for (const key of ["mu", "phi", "rho"] as const) {
            this.sliderEls[key].value = String(this.state.sliders[key]);
          }
          this.updateSliderLabels();
        }
        this.renderStack();
        this.drawOverlay();
      });
      const rm = document.createElement("button");
      rm.textContent = "×";
      rm.addEventListener("click", () => {
        if (this.state.activeDeformer === d.id) this.state.activeDeformer = null;
        this.applyEdit(() => this.api.removeDeformer(d.id));
      });
      li.append(label, rm);
      this.stackEl.append(li);
    }
  }

  private updateSliderLabels(): void {
    for (const key of ["mu", "phi", "rho"] as const) {
      const span = this.root.querySelector(`#value-${key}`) as HTMLElement;
      span.textContent = this.state.sliders[key].toFixed(3);
    }
  }

  private info(text: string): void {
    this.infoEl.textContent = text;
  }

  private persist(): void {
    localStorage.setItem(STORAGE_KEY, serializeViewState(this.state));
  }

  private buildDom(): void {
    this.root.innerHTML = `
      <div class="viewport" style="width:${VIEW_SIZE}px;height:${VIEW_SIZE}px">
        <canvas id="frame" width="${VIEW_SIZE}" height="${VIEW_SIZE}"></canvas>
        <canvas id="overlay" width="${VIEW_SIZE}" height="${VIEW_SIZE}"></canvas>
      </div>
      <div class="panel">
        <div id="status" data-state="connecting">connecting</div>
        <div id="info">loading session…</div>
        <div class="sliders">
          ${(["mu", "phi", "rho"] as const)
            .map(
              (k) => `
            <label>${k === "mu" ? "μ" : k === "phi" ? "φ" : "ρ"}
              <input type="range" id="slider-${k}">
              <span id="value-${k}"></span>
            </label>`,
            )
            .join("")}
        </div>
        <div class="buttons">
          <button id="btn-flip">flip at saddle</button>
          <button id="btn-bulge">bulge</button>
          <button id="btn-dent">dent</button>
          <button id="btn-undo">undo</button>
          <button id="btn-redo">redo</button>
          <button id="btn-export">export OBJ</button>
          <button id="btn-save">save session</button>
        </div>
        <ul id="stack"></ul>
      </div>`;
  }
}

export async function boot(
  root: HTMLElement,
  api: ApiClient,
  socketFactory: SocketFactory,
): Promise<App> {
  const app = new App(root, api, socketFactory);
  await app.start();
  return app;
}
