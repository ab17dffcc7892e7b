"""Procedural scene generators and their analytic distance oracles."""

from __future__ import annotations

import numpy as np
import pytest

from morphield.shapes import (
    CENTER,
    bridged_spheres_sdf,
    box_mesh,
    icosphere,
    icosphere_faceting_bound,
    make_scene,
    torus_mesh,
    torus_sdf,
    two_spheres_mesh,
    two_spheres_sdf,
)


def signed_volume(mesh) -> float:
    p = mesh.vertices[mesh.triangles]
    return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def test_icosphere_counts():
    mesh = icosphere(0.3, CENTER, 3)
    assert mesh.vertex_count == 642  # 10 * 4^3 + 2
    assert mesh.triangle_count == 1280  # 20 * 4^3


def test_icosphere_vertices_on_sphere():
    mesh = icosphere(0.3, CENTER, 3)
    r = np.linalg.norm(mesh.vertices - CENTER, axis=1)
    assert np.max(np.abs(r - 0.3)) < 1e-12


def test_icosphere_faceting_bound():
    mesh = icosphere(0.3, CENTER, 3)
    bound = icosphere_faceting_bound(mesh, CENTER, 0.3)
    assert 0.0 < bound < 2e-3


def test_icosphere_volume_and_orientation():
    mesh = icosphere(0.3, CENTER, 3)
    vol = signed_volume(mesh)
    exact = 4.0 / 3.0 * np.pi * 0.3**3
    assert 0.0 < vol < exact
    assert vol > 0.98 * exact


def test_box_mesh_orientation():
    mesh = box_mesh()
    assert mesh.vertex_count == 8
    assert mesh.triangle_count == 12
    assert abs(signed_volume(mesh) - 0.6**3) < 1e-12


def test_two_spheres_mesh_layout():
    mesh = two_spheres_mesh()
    assert mesh.vertex_count == 2 * 642
    assert mesh.triangle_count == 2 * 1280
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    assert np.max(np.abs((lo + hi) / 2 - CENTER)) < 1e-12
    assert abs((hi - lo)[0] - (0.3 + 2 * 0.12)) < 1e-3  # span along the axis


def test_torus_mesh_on_surface():
    mesh = torus_mesh()
    assert mesh.vertex_count == 96 * 32
    assert mesh.triangle_count == 2 * 96 * 32
    d = torus_sdf(mesh.vertices)
    assert np.max(np.abs(d)) < 1e-12
    assert signed_volume(mesh) > 0.0


def test_two_spheres_sdf_midpoint_gap():
    # surfaces are 0.06 apart, so the midpoint clears both by 0.03
    assert abs(two_spheres_sdf(CENTER[None, :])[0] - 0.03) < 1e-15
    inside_a = np.array([[0.35, 0.5, 0.5]])
    assert abs(two_spheres_sdf(inside_a)[0] + 0.12) < 1e-15


def test_torus_sdf_hole_center():
    assert abs(torus_sdf(CENTER[None, :])[0] - 0.17) < 1e-15
    on_ring = np.array([[0.5 + 0.25, 0.5, 0.5 + 0.08]])
    assert abs(torus_sdf(on_ring)[0]) < 1e-15


def test_bridged_sdf_neck_is_solid():
    # the smooth union closes the gap: negative at the midpoint,
    # and it agrees with plain min far from the blend region
    mid = bridged_spheres_sdf(CENTER[None, :])[0]
    assert -0.05 < mid < 0.0
    far = np.array([[0.1, 0.1, 0.1]])
    assert abs(bridged_spheres_sdf(far)[0] - two_spheres_sdf(far)[0]) < 1e-15


def test_make_scene_names():
    mesh = make_scene("sphere")
    assert mesh.vertex_count == 642
    with pytest.raises(ValueError, match="unknown scene"):
        make_scene("dodecahedron")


def test_make_scene_bridge_builds():
    mesh = make_scene("bridge")
    assert mesh.triangle_count > 1000
    assert np.all(mesh.vertices > 0.0) and np.all(mesh.vertices < 1.0)
    # one connected solid: the neck must be meshed
    assert signed_volume(mesh) > 2 * 4.0 / 3.0 * np.pi * 0.12**3
