"""Signed-distance queries: analytic oracles, sign logic, invariants."""

from __future__ import annotations

import numpy as np

from morphield.meshio import MeshData
from morphield.sdfquery import MeshSdf, sample_grid
from morphield.shapes import (
    CENTER,
    box_mesh,
    icosphere,
    icosphere_faceting_bound,
    two_spheres_mesh,
    two_spheres_sdf,
)
from morphield.spline import GridSpec


def box_sdf(points, lo, hi):
    """Exact distance to an axis-aligned box."""
    p = np.atleast_2d(points)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    c = (lo + hi) / 2
    h = (hi - lo) / 2
    d = np.abs(p - c) - h
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
    inside = np.minimum(np.max(d, axis=1), 0.0)
    return outside + inside


def test_sphere_mesh_matches_analytic_within_faceting():
    mesh = icosphere(0.3, CENTER, 3)
    bound = icosphere_faceting_bound(mesh, CENTER, 0.3)
    sdf = MeshSdf(mesh)
    rng = np.random.default_rng(31)
    pts = rng.uniform(0.05, 0.95, (1000, 3))
    got = sdf.signed_distance_many(pts)
    want = np.linalg.norm(pts - CENTER, axis=1) - 0.3
    err = np.max(np.abs(got - want))
    assert err <= bound + 1e-12
    assert err < 2e-3


def test_sign_inside_and_outside():
    sdf = MeshSdf(icosphere(0.3, CENTER, 3))
    rng = np.random.default_rng(32)
    dirs = rng.standard_normal((200, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    assert np.all(sdf.signed_distance_many(CENTER + 0.2 * dirs) < 0.0)
    assert np.all(sdf.signed_distance_many(CENTER + 0.4 * dirs) > 0.0)


def test_on_vertex_distance_is_zero():
    mesh = icosphere(0.3, CENTER, 3)
    sdf = MeshSdf(mesh)
    d = sdf.signed_distance_many(mesh.vertices[::37])
    assert np.max(np.abs(d)) == 0.0


def test_one_lipschitz():
    sdf = MeshSdf(two_spheres_mesh())
    rng = np.random.default_rng(33)
    a = rng.uniform(0, 1, (500, 3))
    b = a + rng.uniform(-0.1, 0.1, (500, 3))
    da = sdf.signed_distance_many(a)
    db = sdf.signed_distance_many(b)
    gap = np.abs(da - db) - np.linalg.norm(a - b, axis=1)
    assert np.max(gap) < 1e-12


def test_deterministic_and_closest_point_consistent():
    mesh = icosphere(0.3, CENTER, 2)
    sdf = MeshSdf(mesh)
    rng = np.random.default_rng(34)
    pts = rng.uniform(0, 1, (300, 3))
    d1 = sdf.signed_distance_many(pts)
    d2, closest = sdf.signed_distance_many(pts, return_closest=True)
    assert np.array_equal(d1, d2)
    assert np.max(np.abs(np.linalg.norm(pts - closest, axis=1) - np.abs(d1))) < 1e-12
    # the closest points lie on the mesh
    assert np.max(np.abs(sdf.signed_distance_many(closest))) < 1e-9


def test_box_distances_exact():
    lo, hi = (0.2, 0.2, 0.2), (0.8, 0.8, 0.8)
    sdf = MeshSdf(box_mesh(lo, hi))
    pts = np.array(
        [
            [0.9, 0.5, 0.5],  # face
            [0.9, 0.9, 0.5],  # edge
            [0.9, 0.9, 0.9],  # corner
            [0.5, 0.5, 0.5],  # deep inside
            [0.75, 0.75, 0.5],  # inside near an edge
        ]
    )
    got = sdf.signed_distance_many(pts)
    want = box_sdf(pts, lo, hi)
    assert np.max(np.abs(got - want)) < 1e-12


def test_two_spheres_against_oracle():
    mesh = two_spheres_mesh()
    bound = icosphere_faceting_bound(icosphere(0.12, CENTER, 3), CENTER, 0.12)
    sdf = MeshSdf(mesh)
    rng = np.random.default_rng(35)
    pts = rng.uniform(0.1, 0.9, (1000, 3))
    err = np.abs(sdf.signed_distance_many(pts) - two_spheres_sdf(pts))
    assert np.max(err) <= bound + 1e-12


def test_watertight_report():
    mesh = icosphere(0.3, CENTER, 1)
    assert MeshSdf(mesh).report.watertight
    holed = MeshData(vertices=mesh.vertices, triangles=mesh.triangles[1:])
    report = MeshSdf(holed).report
    assert not report.watertight
    assert report.boundary_edges == 3
    assert report.nonmanifold_edges == 0


def test_sample_grid_matches_point_queries():
    sdf = MeshSdf(icosphere(0.3, CENTER, 2))
    spec = GridSpec(8)
    grid = sample_grid(sdf, spec)
    assert grid.values.shape == (9, 9, 9)
    direct = sdf.signed_distance_many(spec.vertex_positions().reshape(-1, 3))
    assert np.array_equal(grid.values, direct.reshape(9, 9, 9))
    # signs: the cube center is inside, the cube corner is outside
    assert grid.values[4, 4, 4] < 0.0
    assert grid.values[0, 0, 0] > 0.0
