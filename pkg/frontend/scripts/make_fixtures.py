"""Regenerate the recorded fixtures the UI unit tests replay.

Everything here comes out of the session service or its renderer, so the
TypeScript display model is always diffed against values the backend really
produced: ray tables for the camera math, raw frames with depth planes for
picking and occlusion, and canned /v1 JSON bodies for the API client.

Run from the frontend directory (or anywhere): python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from morphield.service import FRAME_HEADER, build_app
from morphield.session import create_session_from_mesh
from morphield.shapes import two_spheres_mesh
from morphield.spline import GridSpec, SdfGrid, fit_field
from morphield.surfacing import Camera, RenderParams, render
from morphield.surfacing import _pixel_directions  # ray oracle for the TS camera

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

SPHERE_CENTER = np.array([0.5, 0.5, 0.5])
SPHERE_RADIUS = 0.3
HIT_EPS = 1e-4

CAMERAS = {
    "front": dict(position=[0.5, 0.5, -1.0], look_at=[0.5, 0.5, 0.5],
                  up=[0.0, 1.0, 0.0], vfov_deg=40.0),
    "askew": dict(position=[0.9, 0.2, -0.7], look_at=[0.4, 0.55, 0.45],
                  up=[0.0, 1.0, 0.0], vfov_deg=35.0),
    # looks straight down: forward is parallel to up, exercising the fallback
    "top_down": dict(position=[0.5, 2.0, 0.5], look_at=[0.5, 0.5, 0.5],
                     up=[0.0, 1.0, 0.0], vfov_deg=50.0),
}


def cam_obj(rec: dict) -> Camera:
    return Camera(
        position=np.array(rec["position"]),
        look_at=np.array(rec["look_at"]),
        up=np.array(rec["up"]),
        vfov_deg=rec["vfov_deg"],
    )


def frame_bytes(frame, revision: int) -> bytes:
    h, w = frame.depth.shape
    header = FRAME_HEADER.pack(revision, w, h, frame.timing_ms)
    return header + frame.rgba.tobytes() + frame.depth.astype("<f4").tobytes()


def camera_rays() -> None:
    cases = []
    for name, rec in CAMERAS.items():
        cam = cam_obj(rec)
        forward, right, true_up = cam.basis()
        for w, h in ((8, 6), (33, 17)):
            dirs = _pixel_directions(cam, w, h)
            cases.append({
                "name": f"{name}_{w}x{h}",
                "camera": rec,
                "width": w,
                "height": h,
                "basis": {
                    "forward": forward.tolist(),
                    "right": right.tolist(),
                    "true_up": true_up.tolist(),
                },
                "dirs": dirs.tolist(),  # row-major, index = row * width + col
            })
    (OUT / "camera_rays.json").write_text(json.dumps(cases))
    print(f"camera_rays.json: {len(cases)} cases")


def sphere_pick() -> None:
    spec = GridSpec(32)
    verts = spec.vertex_positions()
    values = np.linalg.norm(verts - SPHERE_CENTER, axis=-1) - SPHERE_RADIUS
    field, report = fit_field(SdfGrid(spec, values))
    assert report.converged

    w = h = 64
    cam = cam_obj(CAMERAS["front"])
    frame = render(field, RenderParams(camera=cam, width=w, height=h))
    (OUT / "sphere_frame.bin").write_bytes(frame_bytes(frame, revision=0))

    dirs = _pixel_directions(cam, w, h)
    origin = cam.position
    picks = []
    for col, row in ((32, 32), (40, 28), (22, 38)):
        t = frame.depth[row, col]
        assert np.isfinite(t), f"pixel ({col},{row}) must hit the sphere"
        # the float32 wire format is what the client reconstructs from
        t32 = float(np.float32(t))
        world = origin + t32 * dirs[row * w + col]
        gap = abs(np.linalg.norm(world - SPHERE_CENTER) - SPHERE_RADIUS)
        assert gap < 2 * HIT_EPS, f"pick at ({col},{row}) off surface by {gap}"
        picks.append({"pixel": [col, row], "t32": t32, "world": world.tolist()})
    assert not np.isfinite(frame.depth[2, 2]), "corner pixel must be background"

    (OUT / "sphere_pick.json").write_text(json.dumps({
        "camera": CAMERAS["front"],
        "width": w,
        "height": h,
        "sphere": {"center": SPHERE_CENTER.tolist(), "radius": SPHERE_RADIUS},
        "hit_eps": HIT_EPS,
        "picks": picks,
        "background": [2, 2],
    }))
    print(f"sphere_pick.json: {len(picks)} picks")


def service_recordings() -> None:
    session = create_session_from_mesh(two_spheres_mesh(subdivisions=2), "two-spheres", n=32)
    app = build_app(session, session_path=None)
    recordings = {}
    with TestClient(app) as client:
        def record(name, method, path, json_body=None):
            res = client.request(method, path, json=json_body)
            recordings[name] = {
                "method": method,
                "path": path,
                "request": json_body,
                "status": res.status_code,
                "body": res.json(),
            }
            return res.json()

        record("meta", "GET", "/v1/meta")
        saddles = record("saddles", "GET", "/v1/saddles")
        record("add_topology", "POST", "/v1/deformers",
               {"type": "topology", "saddle": 0, "mu": 2.0, "phi": 4.0, "rho": 5.0})
        deformers = record("deformers", "GET", "/v1/deformers")
        record("retune", "PATCH", "/v1/deformers/0", {"rho": 3.375})
        record("undo", "POST", "/v1/undo")
        record("redo", "POST", "/v1/redo")
        record("unknown_id", "PATCH", "/v1/deformers/99", {"rho": 1.0})
        record("missing_saddle", "POST", "/v1/deformers", {"type": "topology"})
    (OUT / "api_responses.json").write_text(json.dumps(recordings))
    print(f"api_responses.json: {len(recordings)} recordings")

    # influence box oracle: support corners straight from the record's
    # frame columns and weights, cross-checked against the session object
    rec = deformers[0]
    anchor = np.array(rec["anchor"])
    frame = np.array(rec["frame"])
    weights = np.array(rec["weights"])
    corners = []
    for bits in range(8):
        signs = np.array([1.0 if bits & (1 << k) else -1.0 for k in range(3)])
        corners.append((anchor + frame @ (signs * 2.0 * weights)).tolist())
    live = session.deformer_by_id(0)
    lo, hi = live.support_aabb()
    assert np.allclose(np.max(corners, axis=0), hi, atol=1e-12)
    assert np.allclose(np.min(corners, axis=0), lo, atol=1e-12)
    (OUT / "influence_box.json").write_text(json.dumps({
        "deformer": rec,
        "corners": corners,
        "aabb": {"lo": lo.tolist(), "hi": hi.tolist()},
    }))
    print("influence_box.json written")

    # saddle overlay: frames with depth from two viewpoints over the base
    # field (stack emptied by the undo/redo dance above ending on redo, so
    # remove the deformer explicitly to observe the plain two-sphere scene)
    session.remove_deformer(0)
    w = h = 64
    overlay = {"width": w, "height": h, "saddles": saddles, "views": {}}
    views = {
        "front": CAMERAS["front"],
        # from the -x side the left sphere hides the gap saddle
        "side": dict(position=[-0.9, 0.5, 0.5], look_at=[0.5, 0.5, 0.5],
                     up=[0.0, 1.0, 0.0], vfov_deg=40.0),
    }
    for name, camrec in views.items():
        cam = cam_obj(camrec)
        frame = render(session.composite, RenderParams(camera=cam, width=w, height=h))
        (OUT / f"overlay_{name}.bin").write_bytes(frame_bytes(frame, revision=0))
        dirs = _pixel_directions(cam, w, h)
        origin = cam.position
        markers = []
        for s in saddles:
            p = np.array(s["position"])
            to_p = p - origin
            t = float(np.linalg.norm(to_p))
            # nearest-ray oracle: which pixel looks most directly at the saddle
            pix = int(np.argmax(dirs @ (to_p / t)))
            col, row = pix % w, pix // w
            d = float(frame.depth[row, col])
            markers.append({
                "id": s["id"],
                "pixel": [col, row],
                "t": t,
                "depth_at_pixel": d if np.isfinite(d) else None,
            })
        overlay["views"][name] = {"camera": camrec, "markers": markers}
    front = overlay["views"]["front"]["markers"]
    side = overlay["views"]["side"]["markers"]
    assert any(m["depth_at_pixel"] is None or m["depth_at_pixel"] > m["t"] for m in front)
    assert any(m["depth_at_pixel"] is not None and m["depth_at_pixel"] + 1e-3 < m["t"]
               for m in side), "side view must occlude a saddle"
    (OUT / "overlay.json").write_text(json.dumps(overlay))
    print(f"overlay.json: {len(saddles)} saddles, {len(views)} views")

    # socket payloads at both lengths, plus their decoded values for the
    # parser to be checked against
    cam = cam_obj(CAMERAS["front"])
    small = render(session.composite, RenderParams(camera=cam, width=8, height=6))
    with_depth = frame_bytes(small, revision=7)
    rgba_only = FRAME_HEADER.pack(3, 8, 6, small.timing_ms) + small.rgba.tobytes()
    (OUT / "ws_with_depth.bin").write_bytes(with_depth)
    (OUT / "ws_rgba_only.bin").write_bytes(rgba_only)
    depth32 = small.depth.astype(np.float32).reshape(-1)
    (OUT / "ws.json").write_text(json.dumps({
        "width": 8,
        "height": 6,
        "revision_with_depth": 7,
        "revision_rgba_only": 3,
        "timing_ms_f32": float(np.float32(small.timing_ms)),
        "rgba": small.rgba.reshape(-1).tolist(),
        "depth_f32": [None if not np.isfinite(v) else float(v) for v in depth32],
    }))
    print("ws fixtures written")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    camera_rays()
    sphere_pick()
    service_recordings()


if __name__ == "__main__":
    main()
