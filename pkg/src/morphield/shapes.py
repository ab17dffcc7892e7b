"""Procedural test scenes with known critical-point structure.

Every generator returns a MeshData already laid out in unit-cube coordinates,
so the fitting pipeline can ingest it without renormalizing and oracle values
(gap widths, axis distances) stay in scene units.
"""

from __future__ import annotations

import numpy as np

from .meshio import MeshData

CENTER = np.array([0.5, 0.5, 0.5])


def box_mesh(lo=(0.2, 0.2, 0.2), hi=(0.8, 0.8, 0.8)) -> MeshData:
    """Axis-aligned box: 8 vertices, 12 triangles, outward orientation."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    corners = np.array(
        [[lo[0], lo[1], lo[2]], [hi[0], lo[1], lo[2]], [hi[0], hi[1], lo[2]], [lo[0], hi[1], lo[2]],
         [lo[0], lo[1], hi[2]], [hi[0], lo[1], hi[2]], [hi[0], hi[1], hi[2]], [lo[0], hi[1], hi[2]]]
    )
    quads = [
        (0, 3, 2, 1),  # z-
        (4, 5, 6, 7),  # z+
        (0, 1, 5, 4),  # y-
        (2, 3, 7, 6),  # y+
        (0, 4, 7, 3),  # x-
        (1, 2, 6, 5),  # x+
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return MeshData(vertices=corners, triangles=np.asarray(tris, dtype=np.int64))


def icosphere(radius: float, center, subdivisions: int = 3) -> MeshData:
    """Subdivided icosahedron; vertex count 10*4^k + 2, face count 20*4^k."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [[-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
         [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
         [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1]],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts[0])
    faces = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        verts_list = list(verts)
        midpoint: dict[tuple[int, int], int] = {}

        def midpt(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts_list[a] + verts_list[b]
                m = m / np.linalg.norm(m)
                midpoint[key] = len(verts_list)
                verts_list.append(m)
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpt(a, b), midpt(b, c), midpt(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        verts = np.asarray(verts_list)
        faces = np.asarray(new_faces, dtype=np.int64)
    center = np.asarray(center, dtype=np.float64)
    return MeshData(vertices=verts * radius + center, triangles=faces)


def icosphere_faceting_bound(mesh: MeshData, center, radius: float) -> float:
    """Max deviation of the faceted surface from the true sphere: r*(1 - cos theta)."""
    center = np.asarray(center, dtype=np.float64)
    tri = mesh.vertices[mesh.triangles]
    centroids = tri.mean(axis=1)
    rmin = np.linalg.norm(centroids - center, axis=1).min()
    return float(radius - rmin)


def _merge(meshes: list[MeshData]) -> MeshData:
    verts = []
    tris = []
    base = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + base)
        base += m.vertex_count
    return MeshData(vertices=np.vstack(verts), triangles=np.vstack(tris))


def two_spheres_mesh(
    radius: float = 0.12,
    separation: float = 0.3,
    subdivisions: int = 3,
) -> MeshData:
    """Two disjoint spheres along x, centered on the cube midpoint.

    With the defaults the gap between surfaces is separation - 2*radius = 0.06,
    so the field has a single saddle at the cube center with value gap/2 = 0.03.
    """
    half = separation / 2.0
    a = icosphere(radius, CENTER - [half, 0, 0], subdivisions)
    b = icosphere(radius, CENTER + [half, 0, 0], subdivisions)
    return _merge([a, b])


def torus_mesh(
    major_radius: float = 0.25,
    minor_radius: float = 0.08,
    center=CENTER,
    major_segments: int = 96,
    minor_segments: int = 32,
) -> MeshData:
    """Torus around the z axis; the hole center sits at distance R - r = 0.17 from the surface."""
    center = np.asarray(center, dtype=np.float64)
    u = np.linspace(0.0, 2.0 * np.pi, major_segments, endpoint=False)
    v = np.linspace(0.0, 2.0 * np.pi, minor_segments, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major_radius + minor_radius * np.cos(vv)
    verts = np.stack(
        [ring * np.cos(uu), ring * np.sin(uu), minor_radius * np.sin(vv)], axis=-1
    ).reshape(-1, 3) + center
    tris = []
    for i in range(major_segments):
        i2 = (i + 1) % major_segments
        for j in range(minor_segments):
            j2 = (j + 1) % minor_segments
            a = i * minor_segments + j
            b = i2 * minor_segments + j
            c = i2 * minor_segments + j2
            d = i * minor_segments + j2
            tris.append((a, b, c))
            tris.append((a, c, d))
    return MeshData(vertices=verts, triangles=np.asarray(tris, dtype=np.int64))


# -- analytic distance fields used as scene oracles ------------------------


def sphere_sdf(points: np.ndarray, center, radius: float) -> np.ndarray:
    p = np.atleast_2d(points) - np.asarray(center, dtype=np.float64)
    return np.linalg.norm(p, axis=1) - radius


def two_spheres_sdf(points: np.ndarray, radius: float = 0.12, separation: float = 0.3) -> np.ndarray:
    half = separation / 2.0
    a = sphere_sdf(points, CENTER - [half, 0, 0], radius)
    b = sphere_sdf(points, CENTER + [half, 0, 0], radius)
    return np.minimum(a, b)


def torus_sdf(points: np.ndarray, major_radius: float = 0.25, minor_radius: float = 0.08) -> np.ndarray:
    p = np.atleast_2d(points) - CENTER
    ring = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - major_radius
    return np.sqrt(ring**2 + p[:, 2] ** 2) - minor_radius


def bridged_spheres_sdf(
    points: np.ndarray,
    radius: float = 0.12,
    separation: float = 0.3,
    blend: float = 0.15,
) -> np.ndarray:
    """Smooth union of the two spheres: a single solid with a thin neck.

    Quadratic polynomial smooth-min; with blend > 4*gap_half the midpoint goes
    negative, producing a neck whose waist carries a saddle with F < 0.
    """
    half = separation / 2.0
    a = sphere_sdf(points, CENTER - [half, 0, 0], radius)
    b = sphere_sdf(points, CENTER + [half, 0, 0], radius)
    h = np.maximum(blend - np.abs(a - b), 0.0) / blend
    return np.minimum(a, b) - h * h * blend * 0.25


def bridged_spheres_mesh(
    radius: float = 0.12,
    separation: float = 0.3,
    blend: float = 0.15,
    resolution: int = 128,
) -> MeshData:
    """Mesh the smooth-union solid by marching cubes on a fine sample grid."""
    from skimage.measure import marching_cubes

    ax = np.linspace(0.0, 1.0, resolution)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    vol = bridged_spheres_sdf(pts, radius, separation, blend).reshape(
        resolution, resolution, resolution
    )
    spacing = ax[1] - ax[0]
    verts, faces, _, _ = marching_cubes(vol, level=0.0, spacing=(spacing, spacing, spacing))
    return MeshData(
        vertices=np.ascontiguousarray(verts, dtype=np.float64),
        triangles=np.ascontiguousarray(faces, dtype=np.int64),
    )


SCENES = {
    "sphere": lambda: icosphere(0.3, CENTER, 3),
    "two-spheres": two_spheres_mesh,
    "torus": torus_mesh,
    "bridge": bridged_spheres_mesh,
    "box": box_mesh,
}


def make_scene(name: str) -> MeshData:
    """Build a named scene mesh in unit-cube coordinates."""
    try:
        factory = SCENES[name]
    except KeyError:
        raise ValueError(f"unknown scene {name!r}; choose from {sorted(SCENES)}") from None
    return factory()
