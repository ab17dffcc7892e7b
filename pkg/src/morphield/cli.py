"""Command-line entry points: fit, saddles, edit, render, export, metrics, serve, bench."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .meshio import load_mesh, save_obj
from .metrics import compare_meshes
from .session import (
    EditSession,
    create_session,
    create_session_from_mesh,
    load_session,
    save_session,
)
from .shapes import SCENES, make_scene
from .surfacing import Camera, RenderParams, extract_mesh, render, save_png


def _cmd_fit(args) -> int:
    session = create_session(
        args.input, n=args.n, margin=args.margin, normalize=not args.no_normalize,
        tol=args.tol,
    )
    save_session(session, args.out)
    rep = session.solve_report
    print(f"fit: n={args.n} residual={rep.residual:.3e} iters={rep.iterations} "
          f"converged={rep.converged}")
    print(f"timings: fit={session.timings.fit_seconds:.2f}s "
          f"search={session.timings.search_seconds:.2f}s")
    print(f"saddles: {len(session.saddles)} "
          f"(critical points total: {len(session.critical_points)})")
    print(f"session written to {args.out}")
    return 0


def _cmd_saddles(args) -> int:
    session = load_session(args.session)
    points = session.critical_points if args.all_criticals else session.saddles
    payload = [p.to_dict() for p in points]
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"{len(payload)} points written to {args.out}")
    else:
        print(text)
    return 0


def _apply_edit_command(session: EditSession, cmd: dict) -> None:
    from .deformer import DeformerParams

    op = cmd.get("op")
    if op == "add_topology":
        session.add_topology_deformer(
            cmd["saddle"],
            DeformerParams(
                mu=cmd.get("mu", 2.0), phi=cmd.get("phi", 4.0), rho=cmd.get("rho", 5.0)
            ),
        )
    elif op == "add_geometry":
        session.add_geometry_deformer(
            cmd["point"], cmd["kind"], radius=cmd.get("radius"), rho=cmd.get("rho", 5.0)
        )
    elif op == "retune":
        fields = {k: cmd[k] for k in ("mu", "phi", "rho", "radius") if k in cmd}
        session.retune_deformer(cmd["id"], **fields)
    elif op == "remove":
        session.remove_deformer(cmd["id"])
    else:
        raise ValueError(f"unknown edit op {op!r}")


def _cmd_edit(args) -> int:
    session = load_session(args.session)
    commands = json.loads(Path(args.commands).read_text())
    if not isinstance(commands, list):
        raise ValueError("command file must contain a JSON array")
    for cmd in commands:
        _apply_edit_command(session, cmd)
    out = args.out or args.session
    save_session(session, out)
    print(f"applied {len(commands)} commands; {len(session.composite.deformers)} deformers; "
          f"session written to {out}")
    return 0


def _camera_from_args(args) -> Camera:
    c = args.cam
    return Camera(
        position=np.array(c[:3], dtype=np.float64),
        look_at=np.array(c[3:], dtype=np.float64),
        vfov_deg=args.fov,
    )


def _cmd_render(args) -> int:
    session = load_session(args.session)
    width, height = (int(x) for x in args.size.lower().split("x"))
    params = RenderParams(
        camera=_camera_from_args(args),
        width=width,
        height=height,
        step_scale=args.step_scale,
        hit_eps=args.hit_eps,
    )
    frame = render(session.composite, params)
    save_png(frame, args.out)
    hits = int(np.isfinite(frame.depth).sum())
    print(f"rendered {width}x{height} in {frame.timing_ms:.1f} ms "
          f"({hits} surface pixels) -> {args.out}")
    return 0


def _cmd_export(args) -> int:
    session = load_session(args.session)
    mesh = extract_mesh(session.composite, args.res)
    if mesh is None:
        print("field has no zero level set; nothing to export", file=sys.stderr)
        return 1
    verts = session.transform.invert(mesh.vertices)
    save_obj(args.out, verts, mesh.triangles)
    print(f"exported {mesh.vertex_count} vertices / {mesh.triangle_count} triangles "
          f"-> {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    a = load_mesh(args.a)
    b = load_mesh(args.b)
    report = compare_meshes(a, b, samples=args.samples, threshold=args.threshold)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"report written to {args.out}")
    else:
        print(text)
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    session = load_session(args.session)
    print(f"serving session {args.session} on http://{args.host}:{args.port}/v1")
    serve(session, host=args.host, port=args.port, session_path=args.session)
    return 0


def _cmd_make_scene(args) -> int:
    mesh = make_scene(args.name)
    save_obj(args.out, mesh.vertices, mesh.triangles)
    print(f"scene {args.name!r}: {mesh.vertex_count} vertices / "
          f"{mesh.triangle_count} triangles -> {args.out}")
    return 0


def _cmd_bench(args) -> int:
    """Timing sweep over grid sizes, as CSV plus a rendered figure."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .critical import find_critical_points
    from .sdfquery import MeshSdf, sample_grid
    from .spline import GridSpec, fit_field

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh = make_scene(args.scene)
    sdf = MeshSdf(mesh)
    sizes = [int(x) for x in args.n.split(",")]

    rows = []
    for n in sizes:
        t0 = time.perf_counter()
        grid = sample_grid(sdf, GridSpec(n))
        t1 = time.perf_counter()
        field, report = fit_field(grid)
        t2 = time.perf_counter()
        criticals = find_critical_points(field)
        t3 = time.perf_counter()
        rows.append(
            {
                "n": n,
                "sample_s": t1 - t0,
                "solve_s": t2 - t1,
                "fit_s": t2 - t0,
                "search_s": t3 - t2,
                "residual": report.residual,
                "cg_iterations": report.iterations,
                "critical_points": len(criticals),
            }
        )
        print(f"n={n}: fit {t2 - t0:.2f}s (sample {t1 - t0:.2f} + solve {t2 - t1:.2f}), "
              f"search {t3 - t2:.2f}s, {len(criticals)} critical points")

    csv_path = out_dir / f"bench_{args.scene}.csv"
    cols = list(rows[0].keys())
    with open(csv_path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")

    fig, ax = plt.subplots(figsize=(6, 4))
    ns = [r["n"] for r in rows]
    ax.plot(ns, [r["fit_s"] for r in rows], "o-", label="fit (sample + solve)")
    ax.plot(ns, [r["search_s"] for r in rows], "s-", label="critical point search")
    ax.set_xlabel("grid cells per axis")
    ax.set_ylabel("seconds")
    ax.set_title(f"scene: {args.scene}")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig_path = out_dir / f"bench_{args.scene}.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="morphield",
                                description="implicit shape editing on B-spline distance fields")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="ingest a mesh and fit the field")
    f.add_argument("--input", required=True)
    f.add_argument("--n", type=int, default=64)
    f.add_argument("--margin", type=float, default=0.1)
    f.add_argument("--no-normalize", action="store_true",
                   help="take the mesh coordinates as already unit-cube")
    f.add_argument("--tol", type=float, default=1e-8)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_fit)

    s = sub.add_parser("saddles", help="list saddle points of a fitted session")
    s.add_argument("--session", required=True)
    s.add_argument("--all-criticals", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_saddles)

    e = sub.add_parser("edit", help="apply a scripted command file")
    e.add_argument("--session", required=True)
    e.add_argument("--commands", required=True, help="JSON array of edit commands")
    e.add_argument("--out", help="defaults to overwriting the session")
    e.set_defaults(func=_cmd_edit)

    r = sub.add_parser("render", help="sphere-trace one frame to PNG")
    r.add_argument("--session", required=True)
    r.add_argument("--cam", type=float, nargs=6, metavar=("PX", "PY", "PZ", "TX", "TY", "TZ"),
                   default=[0.5, 0.5, -1.0, 0.5, 0.5, 0.5])
    r.add_argument("--size", default="256x256")
    r.add_argument("--fov", type=float, default=40.0)
    r.add_argument("--step-scale", type=float, default=0.7)
    r.add_argument("--hit-eps", type=float, default=1e-4)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_render)

    x = sub.add_parser("export", help="marching-cubes mesh in original coordinates")
    x.add_argument("--session", required=True)
    x.add_argument("--res", type=int, default=128)
    x.add_argument("--out", required=True)
    x.set_defaults(func=_cmd_export)

    m = sub.add_parser("metrics", help="compare two meshes")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--samples", type=int, default=100_000)
    m.add_argument("--threshold", type=float, default=0.01)
    m.add_argument("--out")
    m.set_defaults(func=_cmd_metrics)

    v = sub.add_parser("serve", help="run the HTTP/WebSocket service")
    v.add_argument("--session", required=True)
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8734)
    v.set_defaults(func=_cmd_serve)

    b = sub.add_parser("bench", help="fit/search timing sweep with CSV + figure")
    b.add_argument("--scene", default="two-spheres", choices=sorted(SCENES))
    b.add_argument("--n", default="16,32,48,64", help="comma-separated grid sizes")
    b.add_argument("--out-dir", default="bench_out")
    b.set_defaults(func=_cmd_bench)

    g = sub.add_parser("make-scene", help="write a procedural test scene as OBJ")
    g.add_argument("--name", required=True, choices=sorted(SCENES))
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_make_scene)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
