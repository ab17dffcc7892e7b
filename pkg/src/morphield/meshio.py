"""Triangle-mesh loading, normalization and writing.

Supported formats are OBJ (triangle faces only) and STL, both binary and
ASCII. STL carries no connectivity, so identical vertex positions are welded
on load to recover shared edges for the pseudo-normal sign test.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshFormatError(ValueError):
    """Raised for unreadable, empty or non-triangular input."""


@dataclass(frozen=True)
class MeshData:
    """Indexed triangle soup; positions are whatever space the file used."""

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        if len(self.vertices) == 0 or len(self.triangles) == 0:
            raise MeshFormatError("mesh has no geometry")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshFormatError("triangle index out of range")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)


@dataclass(frozen=True)
class NormalizationTransform:
    """Uniform map into unit-cube coordinates: q_unit = scale * q_orig + offset."""

    scale: float
    offset: np.ndarray  # (3,)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.offset

    def invert(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.offset) / self.scale


def _prune_unreferenced(vertices: np.ndarray, triangles: np.ndarray) -> MeshData:
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    remap = np.cumsum(used) - 1
    return MeshData(
        vertices=np.ascontiguousarray(vertices[used], dtype=np.float64),
        triangles=np.ascontiguousarray(remap[triangles], dtype=np.int64),
    )


def _parse_obj(path: Path) -> MeshData:
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    face_no = 0
    with open(path, "r", errors="replace") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"{path}: malformed vertex record: {line.strip()!r}")
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif parts[0] == "f":
                face_no += 1
                refs = parts[1:]
                if len(refs) != 3:
                    raise MeshFormatError(
                        f"{path}: face {face_no} has {len(refs)} vertices; only triangles are supported"
                    )
                idx = []
                for ref in refs:
                    # "v", "v/vt", "v//vn", "v/vt/vn" all start with the position index
                    raw = int(ref.split("/")[0])
                    idx.append(raw - 1 if raw > 0 else len(verts) + raw)
                tris.append(tuple(idx))
    if not verts or not tris:
        raise MeshFormatError(f"{path}: no triangles found")
    return _prune_unreferenced(
        np.asarray(verts, dtype=np.float64), np.asarray(tris, dtype=np.int64)
    )


def _weld(positions: np.ndarray) -> MeshData:
    """Collapse exactly-equal positions of a triangle soup into shared vertices."""
    flat = positions.reshape(-1, 3)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    tris = inverse.ravel().reshape(-1, 3).astype(np.int64)
    return MeshData(vertices=np.ascontiguousarray(uniq, dtype=np.float64), triangles=tris)


def _parse_stl_binary(data: bytes, path: Path) -> MeshData:
    count = struct.unpack_from("<I", data, 80)[0]
    expect = 84 + count * 50
    if len(data) < expect:
        raise MeshFormatError(f"{path}: binary STL truncated ({len(data)} < {expect} bytes)")
    rec = np.frombuffer(data, dtype=np.uint8, count=count * 50, offset=84).reshape(count, 50)
    tri = rec[:, 12:48].copy().view("<f4").reshape(count, 3, 3).astype(np.float64)
    return _weld(tri)


def _parse_stl_ascii(text: str, path: Path) -> MeshData:
    pts = []
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 4 and parts[0] == "vertex":
            pts.append((float(parts[1]), float(parts[2]), float(parts[3])))
    if not pts or len(pts) % 3 != 0:
        raise MeshFormatError(f"{path}: ASCII STL has {len(pts)} vertex records, not a multiple of 3")
    return _weld(np.asarray(pts, dtype=np.float64).reshape(-1, 3, 3))


def load_mesh(path) -> MeshData:
    """Load an OBJ or STL file into an indexed triangle mesh.

    Unreferenced vertices are pruned and STL soups are welded on exact
    position equality. Non-triangle faces are an error that names the face.
    """
    path = Path(path)
    if not path.is_file():
        raise MeshFormatError(f"{path}: not a readable file")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return _parse_obj(path)
    if suffix == ".stl":
        data = path.read_bytes()
        # ASCII files start with "solid", but so can binary headers; trust the
        # record count arithmetic over the magic word.
        if len(data) >= 84:
            count = struct.unpack_from("<I", data, 80)[0]
            if len(data) == 84 + count * 50 and count > 0:
                return _parse_stl_binary(data, path)
        if data[:5].lower() == b"solid":
            return _parse_stl_ascii(data.decode(errors="replace"), path)
        return _parse_stl_binary(data, path)
    raise MeshFormatError(f"{path}: unsupported mesh format {suffix!r}")


def save_obj(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    """Write an indexed triangle mesh as OBJ (positions only)."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("# exported triangle mesh\n")
        for v in np.asarray(vertices, dtype=np.float64):
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in np.asarray(triangles, dtype=np.int64):
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def normalize_to_unit(mesh: MeshData, margin: float = 0.1) -> tuple[MeshData, NormalizationTransform]:
    """Uniformly scale and center the mesh so its bounding box fits [margin, 1-margin]^3.

    The longest bounding-box axis spans exactly 1 - 2*margin and the box is
    centered at (0.5, 0.5, 0.5); aspect ratio is preserved.
    """
    if not 0.0 < margin < 0.5:
        raise ValueError(f"margin must lie in (0, 0.5), got {margin}")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    extent = float(np.max(hi - lo))
    if extent <= 0.0:
        raise MeshFormatError("degenerate mesh: zero-extent bounding box")
    scale = (1.0 - 2.0 * margin) / extent
    center = 0.5 * (lo + hi)
    offset = 0.5 - scale * center
    xform = NormalizationTransform(scale=scale, offset=offset)
    return MeshData(vertices=xform.apply(mesh.vertices), triangles=mesh.triangles), xform
