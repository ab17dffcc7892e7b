"""Mesh parsing, welding, pruning, normalization and writing."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from morphield.meshio import (
    MeshData,
    MeshFormatError,
    NormalizationTransform,
    load_mesh,
    normalize_to_unit,
    save_obj,
)


def _write(path, text: str) -> None:
    path.write_text(text)


def test_obj_basic_parse(tmp_path):
    p = tmp_path / "tri.obj"
    _write(
        p,
        "# comment\n"
        "v 0 0 0\n"
        "v 1.0 0.0 0.0\n"
        "v 0 1 0\n"
        "f 1 2 3\n",
    )
    mesh = load_mesh(p)
    assert mesh.vertex_count == 3
    assert mesh.triangle_count == 1
    assert np.array_equal(mesh.triangles, [[0, 1, 2]])
    assert np.allclose(mesh.vertices[1], [1, 0, 0])


def test_obj_slash_forms_and_negative_indices(tmp_path):
    p = tmp_path / "forms.obj"
    _write(
        p,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
        "f 1/5 2/6/7 3//8\n"
        "f -3 -2 -1\n",  # the last three vertices
    )
    mesh = load_mesh(p)
    assert mesh.triangle_count == 2
    assert np.array_equal(mesh.triangles[0], [0, 1, 2])
    assert np.array_equal(mesh.triangles[1], [1, 2, 3])


def test_obj_prunes_unreferenced_vertices(tmp_path):
    p = tmp_path / "extra.obj"
    _write(p, "v 0 0 0\nv 1 0 0\nv 9 9 9\nv 0 1 0\nf 1 2 4\n")
    mesh = load_mesh(p)
    assert mesh.vertex_count == 3
    assert not np.any(np.all(mesh.vertices == [9, 9, 9], axis=1))
    assert np.array_equal(mesh.triangles, [[0, 1, 2]])


def test_obj_quad_face_error_names_face(tmp_path):
    p = tmp_path / "quad.obj"
    _write(p, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 2 3 4\n")
    with pytest.raises(MeshFormatError, match="face 2"):
        load_mesh(p)


def test_obj_malformed_vertex(tmp_path):
    p = tmp_path / "bad.obj"
    _write(p, "v 0 0\nf 1 1 1\n")
    with pytest.raises(MeshFormatError, match="malformed vertex"):
        load_mesh(p)


def test_obj_empty_is_error(tmp_path):
    p = tmp_path / "empty.obj"
    _write(p, "# nothing here\n")
    with pytest.raises(MeshFormatError, match="no triangles"):
        load_mesh(p)


def test_missing_file_and_unknown_suffix(tmp_path):
    with pytest.raises(MeshFormatError, match="not a readable file"):
        load_mesh(tmp_path / "nope.obj")
    p = tmp_path / "mesh.ply"
    p.write_text("ply\n")
    with pytest.raises(MeshFormatError, match="unsupported"):
        load_mesh(p)


def test_save_obj_round_trip_exact(tmp_path):
    rng = np.random.default_rng(1)
    verts = rng.standard_normal((20, 3))
    tris = rng.integers(0, 20, (30, 3)).astype(np.int64)
    p = tmp_path / "out.obj"
    save_obj(p, verts, tris)
    back = load_mesh(p)
    used = np.unique(tris)
    # %.17g round-trips float64 exactly; only referenced vertices survive
    assert np.array_equal(back.vertices, verts[used])
    remap = {int(v): i for i, v in enumerate(used)}
    expect = np.vectorize(remap.get)(tris)
    assert np.array_equal(back.triangles, expect)


def _stl_binary_bytes(tri_list, header=b"\x00" * 80) -> bytes:
    out = [header[:80].ljust(80, b"\x00"), struct.pack("<I", len(tri_list))]
    for tri in tri_list:
        out.append(struct.pack("<3f", 0.0, 0.0, 1.0))
        for v in tri:
            out.append(struct.pack("<3f", *v))
        out.append(struct.pack("<H", 0))
    return b"".join(out)


_TWO_TRIS = [
    [(0, 0, 0), (1, 0, 0), (0, 1, 0)],
    [(1, 0, 0), (1, 1, 0), (0, 1, 0)],
]


def test_stl_binary_welds_shared_vertices(tmp_path):
    p = tmp_path / "quad.stl"
    p.write_bytes(_stl_binary_bytes(_TWO_TRIS))
    mesh = load_mesh(p)
    assert mesh.vertex_count == 4  # 6 corners, 2 shared
    assert mesh.triangle_count == 2
    # welded triangles still reference the same positions
    got = np.sort(mesh.vertices[mesh.triangles].reshape(-1, 3), axis=0)
    want = np.sort(np.asarray(_TWO_TRIS, dtype=np.float64).reshape(-1, 3), axis=0)
    assert np.array_equal(got, want)


def test_stl_binary_with_solid_header(tmp_path):
    # binary files are allowed to start with "solid"; record arithmetic decides
    p = tmp_path / "tricky.stl"
    p.write_bytes(_stl_binary_bytes(_TWO_TRIS, header=b"solid not ascii"))
    mesh = load_mesh(p)
    assert mesh.vertex_count == 4


def test_stl_binary_truncated(tmp_path):
    data = _stl_binary_bytes(_TWO_TRIS)
    p = tmp_path / "short.stl"
    p.write_bytes(data[:-10])
    with pytest.raises(MeshFormatError, match="truncated"):
        load_mesh(p)


def test_stl_ascii(tmp_path):
    lines = ["solid demo"]
    for tri in _TWO_TRIS:
        lines.append("facet normal 0 0 1")
        lines.append("  outer loop")
        for v in tri:
            lines.append(f"    vertex {v[0]} {v[1]} {v[2]}")
        lines.append("  endloop")
        lines.append("endfacet")
    lines.append("endsolid demo")
    p = tmp_path / "ascii.stl"
    p.write_text("\n".join(lines) + "\n")
    mesh = load_mesh(p)
    assert mesh.vertex_count == 4
    assert mesh.triangle_count == 2


def test_stl_ascii_bad_vertex_count(tmp_path):
    p = tmp_path / "bad.stl"
    p.write_text("solid x\nvertex 0 0 0\nvertex 1 0 0\nendsolid x\n")
    with pytest.raises(MeshFormatError, match="multiple of 3"):
        load_mesh(p)


def test_mesh_data_validation():
    verts = np.zeros((3, 3))
    with pytest.raises(MeshFormatError):
        MeshData(vertices=verts, triangles=np.zeros((0, 3), dtype=np.int64))
    with pytest.raises(MeshFormatError, match="out of range"):
        MeshData(vertices=verts, triangles=np.array([[0, 1, 3]]))
    with pytest.raises(MeshFormatError, match="out of range"):
        MeshData(vertices=verts, triangles=np.array([[0, -1, 2]]))


def test_normalize_to_unit_geometry():
    verts = np.array(
        [[2.0, 3.0, 0.0], [6.0, 3.0, 0.0], [6.0, 4.0, 1.0], [2.0, 4.0, 1.0]]
    )
    tris = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    mesh = MeshData(vertices=verts, triangles=tris)
    unit, xform = normalize_to_unit(mesh, margin=0.1)
    lo = unit.vertices.min(axis=0)
    hi = unit.vertices.max(axis=0)
    # longest axis (x, extent 4) spans exactly 1 - 2*margin, centered
    assert abs((hi - lo)[0] - 0.8) < 1e-12
    assert np.max(np.abs((lo + hi) / 2 - 0.5)) < 1e-12
    # aspect preserved: y and z extents scale by the same factor
    assert abs((hi - lo)[1] - 0.2) < 1e-12
    assert abs((hi - lo)[2] - 0.2) < 1e-12
    assert abs(xform.scale - 0.2) < 1e-15
    # round trip back to original coordinates
    assert np.max(np.abs(xform.invert(unit.vertices) - verts)) < 1e-12


def test_normalize_margin_validation():
    mesh = MeshData(
        vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
        triangles=np.array([[0, 1, 2]]),
    )
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            normalize_to_unit(mesh, margin=bad)


def test_normalize_degenerate_mesh():
    mesh = MeshData(
        vertices=np.zeros((3, 3)),
        triangles=np.array([[0, 1, 2]]),
    )
    with pytest.raises(MeshFormatError, match="degenerate"):
        normalize_to_unit(mesh)


def test_transform_roundtrip_random():
    xform = NormalizationTransform(scale=0.37, offset=np.array([0.1, -0.2, 0.05]))
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((100, 3)) * 5
    assert np.max(np.abs(xform.invert(xform.apply(pts)) - pts)) < 1e-12
