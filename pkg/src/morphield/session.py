"""Edit sessions: fit -> saddle search -> deformer stack, with JSON persistence.

A session file is a JSON envelope plus a binary sidecar `<file>.coeff` holding
the coefficient lattice (13 MB at n=150 does not belong in JSON). Both writes
are atomic (temp file then rename), so a crash never leaves a half-written
session. Floats round-trip exactly: JSON numbers are emitted with repr
precision and the lattice is stored as raw little-endian float64.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .critical import CriticalPoint, find_critical_points
from .deformer import (
    CompositeField,
    Deformer,
    DeformerParams,
    build_geometry_deformer,
    build_topology_deformer,
    retune_geometry,
    retune_topology,
)
from .meshio import MeshData, NormalizationTransform, load_mesh, normalize_to_unit
from .sdfquery import MeshSdf, sample_grid
from .spline import GridSpec, SolveReport, SplineField, fit_field

FORMAT_VERSION = 1
HISTORY_CAP = 256
_COEFF_MAGIC = b"MFLD"


class SessionError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitTimings:
    fit_seconds: float  # SDF sampling + coefficient solve
    search_seconds: float  # critical point search


def _identity_transform() -> NormalizationTransform:
    return NormalizationTransform(scale=1.0, offset=np.zeros(3))


def _mesh_digest(mesh: MeshData) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices).tobytes())
    h.update(np.ascontiguousarray(mesh.triangles).tobytes())
    return h.hexdigest()


class EditSession:
    """Mutable editing state over an immutable fitted field.

    The saddle list is computed once at fit time and never changes; deformers
    are the only mutable state, guarded by the undo/redo stacks. Every edit
    bumps ``revision`` by one.
    """

    def __init__(
        self,
        mesh_label: str,
        mesh_hash: str,
        transform: NormalizationTransform,
        margin: float,
        normalized: bool,
        field: SplineField,
        solve_report: SolveReport,
        critical_points: list[CriticalPoint],
        timings: FitTimings,
        deformers: tuple[Deformer, ...] = (),
        next_deformer_id: int = 0,
    ):
        self.mesh_label = mesh_label
        self.mesh_hash = mesh_hash
        self.transform = transform
        self.margin = margin
        self.normalized = normalized
        self.field = field
        self.solve_report = solve_report
        self.critical_points = list(critical_points)
        self.timings = timings
        self.composite = CompositeField(field, deformers)
        self.next_deformer_id = next_deformer_id
        self.revision = 0
        self._undo: list[tuple] = []
        self._redo: list[tuple] = []

    @property
    def spec(self) -> GridSpec:
        return self.field.spec

    @property
    def saddles(self) -> list[CriticalPoint]:
        return [p for p in self.critical_points if p.is_saddle]

    def deformer_by_id(self, deformer_id: int) -> Deformer:
        for d in self.composite.deformers:
            if d.id == deformer_id:
                return d
        raise KeyError(f"no deformer with id {deformer_id}")

    # -- edits ----------------------------------------------------------

    def _push_undo(self, entry: tuple):
        self._undo.append(entry)
        if len(self._undo) > HISTORY_CAP:
            self._undo.pop(0)
        self._redo.clear()

    def _commit(self, new_composite: CompositeField):
        self.composite = new_composite
        self.revision += 1

    def add_topology_deformer(
        self, saddle_index: int, params: DeformerParams = DeformerParams()
    ) -> tuple[Deformer, tuple[np.ndarray, np.ndarray]]:
        saddles = self.saddles
        if not 0 <= saddle_index < len(saddles):
            raise KeyError(f"saddle index {saddle_index} out of range (have {len(saddles)})")
        d = build_topology_deformer(
            self.field, saddles[saddle_index], params, deformer_id=self.next_deformer_id
        )
        self.next_deformer_id += 1
        self._push_undo(("remove", d))
        self._commit(self.composite.with_deformer(d))
        return d, d.support_aabb()

    def add_geometry_deformer(
        self, point, kind: str, radius: float | None = None, rho: float = 5.0
    ) -> tuple[Deformer, tuple[np.ndarray, np.ndarray]]:
        d = build_geometry_deformer(
            self.composite, point, kind, radius=radius, rho=rho,
            deformer_id=self.next_deformer_id,
        )
        self.next_deformer_id += 1
        self._push_undo(("remove", d))
        self._commit(self.composite.with_deformer(d))
        return d, d.support_aabb()

    def retune_deformer(self, deformer_id: int, **kwargs) -> tuple[Deformer, tuple]:
        old = self.deformer_by_id(deformer_id)
        new = _retuned(old, self.spec.w, kwargs)
        self._push_undo(("replace", old))
        self._commit(self.composite.replace_deformer(new))
        return new, _union_aabb(old.support_aabb(), new.support_aabb())

    def remove_deformer(self, deformer_id: int) -> tuple[Deformer, tuple]:
        old = self.deformer_by_id(deformer_id)
        self._push_undo(("add", old))
        self._commit(self.composite.without_deformer(deformer_id))
        return old, old.support_aabb()

    def _apply_inverse(self, entry: tuple) -> tuple:
        """Apply an undo/redo record; returns the record that reverses it."""
        op, d = entry
        if op == "remove":
            reverse = ("add", self.deformer_by_id(d.id))
            self._commit(self.composite.without_deformer(d.id))
        elif op == "add":
            reverse = ("remove", d)
            self._commit(self.composite.with_deformer(d))
        else:  # replace
            reverse = ("replace", self.deformer_by_id(d.id))
            self._commit(self.composite.replace_deformer(d))
        return reverse

    def undo(self) -> bool:
        if not self._undo:
            return False
        entry = self._undo.pop()
        self._redo.append(self._apply_inverse(entry))
        return True

    def redo(self) -> bool:
        if not self._redo:
            return False
        entry = self._redo.pop()
        self._undo.append(self._apply_inverse(entry))
        if len(self._undo) > HISTORY_CAP:
            self._undo.pop(0)
        return True


def _retuned(old: Deformer, w: float, kwargs: dict) -> Deformer:
    if old.kind == "topology":
        merged = dict(old.params)
        merged.update({k: v for k, v in kwargs.items() if k in ("mu", "phi", "rho")})
        return retune_topology(old, DeformerParams(**merged), w)
    merged = dict(old.params)
    merged.update({k: v for k, v in kwargs.items() if k in ("radius", "rho")})
    return retune_geometry(old, merged["radius"], merged["rho"], w)


def _union_aabb(a: tuple, b: tuple) -> tuple[np.ndarray, np.ndarray]:
    return np.minimum(a[0], b[0]), np.maximum(a[1], b[1])


# -- session construction ----------------------------------------------------


def create_session_from_mesh(
    mesh: MeshData,
    label: str,
    n: int,
    margin: float = 0.1,
    normalize: bool = True,
    tol: float = 1e-8,
) -> EditSession:
    """Full pipeline on an in-memory mesh: normalize, sample, fit, search."""
    if normalize:
        mesh_unit, transform = normalize_to_unit(mesh, margin)
    else:
        mesh_unit, transform = mesh, _identity_transform()

    t0 = time.perf_counter()
    sdf = MeshSdf(mesh_unit)
    spec = GridSpec(n)
    grid = sample_grid(sdf, spec)
    field, report = fit_field(grid, tol=tol)
    t1 = time.perf_counter()
    criticals = find_critical_points(field)
    t2 = time.perf_counter()

    return EditSession(
        mesh_label=label,
        mesh_hash=_mesh_digest(mesh),
        transform=transform,
        margin=margin if normalize else 0.0,
        normalized=normalize,
        field=field,
        solve_report=report,
        critical_points=criticals,
        timings=FitTimings(fit_seconds=t1 - t0, search_seconds=t2 - t1),
    )


def create_session(
    mesh_path, n: int, margin: float = 0.1, normalize: bool = True, tol: float = 1e-8
) -> EditSession:
    mesh = load_mesh(mesh_path)
    return create_session_from_mesh(
        mesh, label=str(mesh_path), n=n, margin=margin, normalize=normalize, tol=tol
    )


# -- persistence -------------------------------------------------------------


def _coeff_blob(session: EditSession) -> bytes:
    spec = session.spec
    header = _COEFF_MAGIC + struct.pack(
        "<II", FORMAT_VERSION, spec.n
    ) + struct.pack(
        "<5d",
        session.margin,
        session.transform.scale,
        session.transform.offset[0],
        session.transform.offset[1],
        session.transform.offset[2],
    )
    lattice = session.field.coefficients.astype("<f8").ravel(order="F")
    return header + lattice.tobytes()


def _parse_coeff_blob(blob: bytes):
    if blob[:4] != _COEFF_MAGIC:
        raise SessionError("coefficient sidecar: bad magic")
    version, n = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise SessionError(f"coefficient sidecar: unsupported version {version}")
    margin, scale, ox, oy, oz = struct.unpack_from("<5d", blob, 12)
    m = n + 1
    expected = 52 + m**3 * 8
    if len(blob) != expected:
        raise SessionError(f"coefficient sidecar: size {len(blob)} != expected {expected}")
    flat = np.frombuffer(blob, dtype="<f8", offset=52)
    coeffs = flat.reshape((m, m, m), order="F").copy()
    return n, margin, (scale, np.array([ox, oy, oz])), coeffs


def _deformer_to_dict(d: Deformer) -> dict:
    return {
        "id": d.id,
        "kind": d.kind,
        "anchor": [float(x) for x in d.anchor],
        "frame": [[float(x) for x in row] for row in d.frame],
        "weights": [float(x) for x in d.weights],
        "beta": d.beta,
        "anchor_value": d.anchor_value,
        "frame_eigenvalues": [float(x) for x in d.frame_eigenvalues],
        "params": d.params,
        "mode": d.mode,
    }


def _deformer_from_dict(rec: dict) -> Deformer:
    return Deformer(
        id=int(rec["id"]),
        kind=rec["kind"],
        anchor=np.array(rec["anchor"], dtype=np.float64),
        frame=np.array(rec["frame"], dtype=np.float64),
        weights=np.array(rec["weights"], dtype=np.float64),
        beta=float(rec["beta"]),
        anchor_value=float(rec["anchor_value"]),
        frame_eigenvalues=np.array(rec["frame_eigenvalues"], dtype=np.float64),
        params=rec["params"],
        mode=rec.get("mode", "hessian"),
    )


def _critical_from_dict(rec: dict) -> CriticalPoint:
    return CriticalPoint(
        position=np.array(rec["position"], dtype=np.float64),
        value=float(rec["value"]),
        grad_norm=float(rec["grad_norm"]),
        eigenvalues=np.array(rec["eigenvalues"], dtype=np.float64),
        eigenvectors=np.array(rec["eigenvectors"], dtype=np.float64),
        cls=rec["class"],
    )


def _atomic_write(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def sidecar_path(session_path) -> Path:
    p = Path(session_path)
    return p.with_name(p.name + ".coeff")


def save_session(session: EditSession, path) -> None:
    path = Path(path)
    blob = _coeff_blob(session)
    envelope = {
        "format_version": FORMAT_VERSION,
        "mesh": {"label": session.mesh_label, "sha256": session.mesh_hash},
        "normalization": {
            "scale": session.transform.scale,
            "offset": [float(x) for x in session.transform.offset],
            "normalized": session.normalized,
        },
        "grid": {"n": session.spec.n, "margin": session.margin},
        "fit": {
            "converged": session.solve_report.converged,
            "iterations": session.solve_report.iterations,
            "residual": session.solve_report.residual,
            "fit_seconds": session.timings.fit_seconds,
            "search_seconds": session.timings.search_seconds,
        },
        "coeff_sidecar": {
            "file": sidecar_path(path).name,
            "sha256": hashlib.sha256(blob).hexdigest(),
        },
        "critical_points": [p.to_dict() for p in session.critical_points],
        "deformers": [_deformer_to_dict(d) for d in session.composite.deformers],
        "next_deformer_id": session.next_deformer_id,
    }
    _atomic_write(sidecar_path(path), blob)
    _atomic_write(path, json.dumps(envelope, indent=2).encode() + b"\n")


def load_session(path) -> EditSession:
    path = Path(path)
    if not path.is_file():
        raise SessionError(f"{path}: no such session file")
    with open(path, "rb") as fh:
        envelope = json.loads(fh.read())
    if envelope.get("format_version") != FORMAT_VERSION:
        raise SessionError(f"unsupported session format {envelope.get('format_version')}")

    side = path.with_name(envelope["coeff_sidecar"]["file"])
    blob = side.read_bytes()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != envelope["coeff_sidecar"]["sha256"]:
        raise SessionError("coefficient sidecar hash mismatch")
    n, margin, (scale, offset), coeffs = _parse_coeff_blob(blob)
    if n != envelope["grid"]["n"]:
        raise SessionError("sidecar grid size disagrees with envelope")

    field = SplineField(GridSpec(n), coeffs)
    fit = envelope["fit"]
    session = EditSession(
        mesh_label=envelope["mesh"]["label"],
        mesh_hash=envelope["mesh"]["sha256"],
        transform=NormalizationTransform(scale=scale, offset=offset),
        margin=margin,
        normalized=bool(envelope["normalization"].get("normalized", True)),
        field=field,
        solve_report=SolveReport(
            converged=bool(fit["converged"]),
            iterations=int(fit["iterations"]),
            residual=float(fit["residual"]),
        ),
        critical_points=[_critical_from_dict(r) for r in envelope["critical_points"]],
        timings=FitTimings(fit["fit_seconds"], fit["search_seconds"]),
        deformers=tuple(_deformer_from_dict(r) for r in envelope["deformers"]),
        next_deformer_id=int(envelope["next_deformer_id"]),
    )
    return session
