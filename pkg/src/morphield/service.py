"""HTTP + WebSocket service exposing an edit session to interactive clients.

Single-writer semantics: every mutation (deformer add/retune/remove, undo,
redo) is serialized through one lock and bumps the session revision. Renders
and exports take a snapshot of the composite under the lock, then work
outside it, and report the revision they saw.
"""

from __future__ import annotations

import asyncio
import io
import struct
import threading
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from .deformer import DeformerParams, ProjectionError
from .meshio import save_obj
from .session import EditSession, save_session
from .surfacing import Camera, RenderParams, extract_mesh, render

FRAME_HEADER = struct.Struct("<IIIf")  # revision, width, height, timing_ms


class CameraModel(BaseModel):
    position: list[float] = Field(default=[0.5, 0.5, -1.0], min_length=3, max_length=3)
    look_at: list[float] = Field(default=[0.5, 0.5, 0.5], min_length=3, max_length=3)
    up: list[float] = Field(default=[0.0, 1.0, 0.0], min_length=3, max_length=3)
    vfov_deg: float = 40.0


class RenderRequest(BaseModel):
    camera: CameraModel = Field(default_factory=CameraModel)
    width: int = 256
    height: int = 256
    max_steps: int = 256
    step_scale: float = 0.7
    hit_eps: float = 1e-4
    max_distance: float = 4.0
    # raw responses append a float32 depth plane so pickers can unproject
    format: str = "png"  # png | raw
    depth: bool = False  # frame socket only: append depth after the RGBA plane


class AddDeformerRequest(BaseModel):
    type: str  # topology | bulge | concavity
    saddle: Optional[int] = None
    point: Optional[list[float]] = None
    mu: float = 2.0
    phi: float = 4.0
    rho: float = 5.0
    radius: Optional[float] = None


class RetuneRequest(BaseModel):
    mu: Optional[float] = None
    phi: Optional[float] = None
    rho: Optional[float] = None
    radius: Optional[float] = None


class SaveRequest(BaseModel):
    path: Optional[str] = None


def _render_params(req: RenderRequest) -> RenderParams:
    cam = Camera(
        position=np.array(req.camera.position, dtype=np.float64),
        look_at=np.array(req.camera.look_at, dtype=np.float64),
        up=np.array(req.camera.up, dtype=np.float64),
        vfov_deg=req.camera.vfov_deg,
    )
    return RenderParams(
        camera=cam,
        width=req.width,
        height=req.height,
        max_steps=req.max_steps,
        step_scale=req.step_scale,
        hit_eps=req.hit_eps,
        max_distance=req.max_distance,
    )


def _aabb_json(aabb) -> dict:
    lo, hi = aabb
    return {"lo": [float(x) for x in lo], "hi": [float(x) for x in hi]}


def build_app(session: EditSession, session_path: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="morphield", version="1")
    lock = threading.Lock()

    def snapshot():
        with lock:
            return session.composite, session.revision

    @app.get("/v1/meta")
    def meta():
        with lock:
            return {
                "n": session.spec.n,
                "w": session.spec.w,
                "margin": session.margin,
                "normalized": session.normalized,
                "mesh": {"label": session.mesh_label, "sha256": session.mesh_hash},
                "revision": session.revision,
                "saddle_count": len(session.saddles),
                "deformer_count": len(session.composite.deformers),
                "fit": {
                    "residual": session.solve_report.residual,
                    "iterations": session.solve_report.iterations,
                    "converged": session.solve_report.converged,
                    "fit_seconds": session.timings.fit_seconds,
                    "search_seconds": session.timings.search_seconds,
                },
                "history": {"undo": len(session._undo), "redo": len(session._redo)},
            }

    @app.get("/v1/saddles")
    def saddles():
        with lock:
            return [
                {"id": i, **p.to_dict()} for i, p in enumerate(session.saddles)
            ]

    @app.get("/v1/deformers")
    def deformers():
        from .session import _deformer_to_dict

        with lock:
            return [_deformer_to_dict(d) for d in session.composite.deformers]

    @app.post("/v1/deformers", status_code=201)
    def add_deformer(req: AddDeformerRequest):
        with lock:
            try:
                if req.type == "topology":
                    if req.saddle is None:
                        raise HTTPException(422, "topology deformer requires a saddle id")
                    d, aabb = session.add_topology_deformer(
                        req.saddle, DeformerParams(mu=req.mu, phi=req.phi, rho=req.rho)
                    )
                elif req.type in ("bulge", "concavity"):
                    if req.point is None or len(req.point) != 3:
                        raise HTTPException(422, "geometry deformer requires a 3D point")
                    d, aabb = session.add_geometry_deformer(
                        req.point, req.type, radius=req.radius, rho=req.rho
                    )
                else:
                    raise HTTPException(422, f"unknown deformer type {req.type!r}")
            except KeyError as exc:
                raise HTTPException(404, str(exc)) from exc
            except (ValueError, ProjectionError) as exc:
                raise HTTPException(422, str(exc)) from exc
            return {"id": d.id, "revision": session.revision, "changed": _aabb_json(aabb)}

    @app.patch("/v1/deformers/{deformer_id}")
    def retune(deformer_id: int, req: RetuneRequest):
        fields = {k: v for k, v in req.model_dump().items() if v is not None}
        with lock:
            try:
                d, aabb = session.retune_deformer(deformer_id, **fields)
            except KeyError as exc:
                raise HTTPException(404, str(exc)) from exc
            except (ValueError, TypeError) as exc:
                raise HTTPException(422, str(exc)) from exc
            return {"id": d.id, "revision": session.revision, "changed": _aabb_json(aabb)}

    @app.delete("/v1/deformers/{deformer_id}")
    def remove(deformer_id: int):
        with lock:
            try:
                _, aabb = session.remove_deformer(deformer_id)
            except KeyError as exc:
                raise HTTPException(404, str(exc)) from exc
            return {"revision": session.revision, "changed": _aabb_json(aabb)}

    @app.post("/v1/undo")
    def undo():
        with lock:
            changed = session.undo()
            return {"ok": changed, "revision": session.revision}

    @app.post("/v1/redo")
    def redo():
        with lock:
            changed = session.redo()
            return {"ok": changed, "revision": session.revision}

    @app.post("/v1/render")
    def render_frame(req: RenderRequest):
        if req.format not in ("png", "raw"):
            raise HTTPException(422, f"unknown render format {req.format!r}")
        composite, revision = snapshot()
        try:
            params = _render_params(req)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        frame = render(composite, params)
        headers = {
            "X-Revision": str(revision),
            "X-Render-Ms": f"{frame.timing_ms:.3f}",
        }
        if req.format == "raw":
            header = FRAME_HEADER.pack(revision, params.width, params.height, frame.timing_ms)
            body = header + frame.rgba.tobytes() + frame.depth.astype("<f4").tobytes()
            return Response(content=body, media_type="application/octet-stream", headers=headers)
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(frame.rgba, mode="RGBA").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png", headers=headers)

    @app.get("/v1/export")
    def export(res: int = Query(default=128, ge=8, le=512)):
        composite, revision = snapshot()
        mesh = extract_mesh(composite, res)
        if mesh is None:
            raise HTTPException(422, "field has no zero level set at this resolution")
        verts = session.transform.invert(mesh.vertices)
        buf = io.StringIO()
        buf.write("# exported triangle mesh\n")
        for v in verts:
            buf.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            buf.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        return Response(
            content=buf.getvalue(),
            media_type="text/plain",
            headers={"X-Revision": str(revision)},
        )

    @app.post("/v1/session/save")
    def save(req: SaveRequest):
        target = req.path or session_path
        if not target:
            raise HTTPException(422, "no session path configured; provide one")
        with lock:
            save_session(session, target)
            return {"path": str(target), "revision": session.revision}

    @app.websocket("/v1/frames")
    async def frames(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                text = await ws.receive_text()
                # latest-wins: drop stale requests that piled up while rendering
                while True:
                    try:
                        text = await asyncio.wait_for(ws.receive_text(), timeout=0.001)
                    except asyncio.TimeoutError:
                        break
                req = RenderRequest.model_validate_json(text)
                composite, revision = snapshot()
                params = _render_params(req)
                frame = await asyncio.to_thread(render, composite, params)
                header = FRAME_HEADER.pack(
                    revision, params.width, params.height, frame.timing_ms
                )
                payload = header + frame.rgba.tobytes()
                if req.depth:
                    payload += frame.depth.astype("<f4").tobytes()
                await ws.send_bytes(payload)
        except WebSocketDisconnect:
            return

    return app


def serve(session: EditSession, host: str = "127.0.0.1", port: int = 8734,
          session_path: Optional[str] = None):
    """Run the service until interrupted."""
    import uvicorn

    app = build_app(session, session_path=session_path)
    uvicorn.run(app, host=host, port=port, log_level="warning")
