"""Signed distance queries against a triangle mesh.

Closest points come from a bounding-volume hierarchy traversed nearest-first;
signs come from angle-weighted pseudo-normals at the closest feature (face,
edge or vertex), which is exact for watertight meshes. Non-watertight input
degrades to a best-effort sign and is reported, not rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .meshio import MeshData
from .spline import GridSpec, SdfGrid

_LEAF_SIZE = 4
_STACK_DEPTH = 128


@dataclass(frozen=True)
class WatertightReport:
    boundary_edges: int
    nonmanifold_edges: int

    @property
    def watertight(self) -> bool:
        return self.boundary_edges == 0 and self.nonmanifold_edges == 0


def _face_normals_and_areas(verts: np.ndarray, tris: np.ndarray):
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    cross = np.cross(b - a, c - a)
    norm = np.linalg.norm(cross, axis=1)
    safe = np.where(norm > 0.0, norm, 1.0)
    return cross / safe[:, None], 0.5 * norm


def _corner_angles(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Interior angle at each triangle corner, shape (F, 3)."""
    p = verts[tris]  # (F, 3, 3)
    angles = np.empty((len(tris), 3), dtype=np.float64)
    for k in range(3):
        e1 = p[:, (k + 1) % 3] - p[:, k]
        e2 = p[:, (k + 2) % 3] - p[:, k]
        n1 = np.linalg.norm(e1, axis=1)
        n2 = np.linalg.norm(e2, axis=1)
        safe = np.where((n1 > 0) & (n2 > 0), n1 * n2, 1.0)
        cosang = np.clip(np.einsum("ij,ij->i", e1, e2) / safe, -1.0, 1.0)
        angles[:, k] = np.arccos(cosang)
    return angles


def _pseudo_normals(verts: np.ndarray, tris: np.ndarray, face_n: np.ndarray):
    """Per-face lookup tables of vertex and edge pseudo-normals.

    Vertex normals are angle-weighted sums over incident faces; edge normals
    are the sum of the two adjacent face normals (a boundary edge keeps its
    single face normal). Returned unnormalized; only the sign of a dot product
    is consumed.
    """
    nv = len(verts)
    angles = _corner_angles(verts, tris)
    vert_n = np.zeros((nv, 3), dtype=np.float64)
    np.add.at(vert_n, tris.ravel(), (angles[:, :, None] * face_n[:, None, :]).reshape(-1, 3))

    # Edge k of a face joins corner k and corner k+1; the far corner is k+2.
    f = len(tris)
    ev0 = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
    ev1 = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0]])
    key = np.stack([np.minimum(ev0, ev1), np.maximum(ev0, ev1)], axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    edge_accum = np.zeros((len(uniq), 3), dtype=np.float64)
    np.add.at(edge_accum, inverse, np.tile(face_n, (3, 1)))

    face_vert_n = vert_n[tris]  # (F, 3, 3)
    face_edge_n = edge_accum[inverse].reshape(3, f, 3).transpose(1, 0, 2).copy()

    boundary = int(np.count_nonzero(counts == 1))
    nonmanifold = int(np.count_nonzero(counts > 2))
    return face_vert_n, face_edge_n, WatertightReport(boundary, nonmanifold)


def _build_bvh(verts: np.ndarray, tris: np.ndarray):
    """Median-split BVH over triangle centroids; flat arrays, deterministic."""
    f = len(tris)
    p = verts[tris]
    tri_lo = p.min(axis=1)
    tri_hi = p.max(axis=1)
    centroids = p.mean(axis=1)

    max_nodes = 2 * ((f + _LEAF_SIZE - 1) // _LEAF_SIZE) * 2 + 1
    node_lo = np.empty((max_nodes, 3), dtype=np.float64)
    node_hi = np.empty((max_nodes, 3), dtype=np.float64)
    node_left = np.full(max_nodes, -1, dtype=np.int64)
    node_right = np.full(max_nodes, -1, dtype=np.int64)
    node_start = np.full(max_nodes, -1, dtype=np.int64)
    node_count = np.zeros(max_nodes, dtype=np.int64)

    order = np.arange(f, dtype=np.int64)
    count = 0

    def alloc() -> int:
        nonlocal count
        idx = count
        count += 1
        return idx

    stack = [(alloc(), 0, f)]
    while stack:
        node, lo, hi = stack.pop()
        idx = order[lo:hi]
        node_lo[node] = tri_lo[idx].min(axis=0)
        node_hi[node] = tri_hi[idx].max(axis=0)
        if hi - lo <= _LEAF_SIZE:
            node_start[node] = lo
            node_count[node] = hi - lo
            continue
        cen = centroids[idx]
        axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
        perm = np.argsort(cen[:, axis], kind="stable")
        order[lo:hi] = idx[perm]
        mid = lo + (hi - lo) // 2
        left = alloc()
        right = alloc()
        node_left[node] = left
        node_right[node] = right
        stack.append((left, lo, mid))
        stack.append((right, mid, hi))

    return (
        node_lo[:count].copy(),
        node_hi[:count].copy(),
        node_left[:count].copy(),
        node_right[:count].copy(),
        node_start[:count].copy(),
        node_count[:count].copy(),
        order,
    )


@njit(cache=True, inline="always")
def _closest_on_triangle(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Closest point on triangle abc to p, plus barycentrics of that point."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az, 1.0, 0.0, 0.0

    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz, 0.0, 1.0, 0.0

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz, 1.0 - v, v, 0.0

    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz, 0.0, 0.0, 1.0

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz, 1.0 - w, 0.0, w

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (
            bx + w * (cx - bx),
            by + w * (cy - by),
            bz + w * (cz - bz),
            0.0,
            1.0 - w,
            w,
        )

    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (
        ax + abx * v + acx * w,
        ay + aby * v + acy * w,
        az + abz * v + acz * w,
        1.0 - v - w,
        v,
        w,
    )


@njit(cache=True, inline="always")
def _box_sqdist(px, py, pz, lox, loy, loz, hix, hiy, hiz):
    dx = max(lox - px, 0.0, px - hix)
    dy = max(loy - py, 0.0, py - hiy)
    dz = max(loz - pz, 0.0, pz - hiz)
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _query_kernel(
    points,
    verts,
    tris,
    order,
    node_lo,
    node_hi,
    node_left,
    node_right,
    node_start,
    node_count,
    face_n,
    face_vert_n,
    face_edge_n,
    out_dist,
    out_closest,
):
    stack = np.empty(_STACK_DEPTH, dtype=np.int64)
    for qi in range(points.shape[0]):
        px, py, pz = points[qi, 0], points[qi, 1], points[qi, 2]
        best = np.inf
        best_tri = -1
        bcx = bcy = bcz = 0.0
        bu = bv = bw = 0.0

        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            if (
                _box_sqdist(
                    px, py, pz,
                    node_lo[node, 0], node_lo[node, 1], node_lo[node, 2],
                    node_hi[node, 0], node_hi[node, 1], node_hi[node, 2],
                )
                >= best
            ):
                continue
            if node_count[node] > 0:
                start = node_start[node]
                for t in range(start, start + node_count[node]):
                    f = order[t]
                    ia, ib, ic = tris[f, 0], tris[f, 1], tris[f, 2]
                    cx_, cy_, cz_, u, v, w = _closest_on_triangle(
                        px, py, pz,
                        verts[ia, 0], verts[ia, 1], verts[ia, 2],
                        verts[ib, 0], verts[ib, 1], verts[ib, 2],
                        verts[ic, 0], verts[ic, 1], verts[ic, 2],
                    )
                    dx = px - cx_
                    dy = py - cy_
                    dz = pz - cz_
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 < best:
                        best = d2
                        best_tri = f
                        bcx, bcy, bcz = cx_, cy_, cz_
                        bu, bv, bw = u, v, w
            else:
                left = node_left[node]
                right = node_right[node]
                dl = _box_sqdist(
                    px, py, pz,
                    node_lo[left, 0], node_lo[left, 1], node_lo[left, 2],
                    node_hi[left, 0], node_hi[left, 1], node_hi[left, 2],
                )
                dr = _box_sqdist(
                    px, py, pz,
                    node_lo[right, 0], node_lo[right, 1], node_lo[right, 2],
                    node_hi[right, 0], node_hi[right, 1], node_hi[right, 2],
                )
                # push the farther child first so the nearer pops first
                if dl <= dr:
                    if dr < best:
                        stack[top] = right
                        top += 1
                    if dl < best:
                        stack[top] = left
                        top += 1
                else:
                    if dl < best:
                        stack[top] = left
                        top += 1
                    if dr < best:
                        stack[top] = right
                        top += 1

        # pick the pseudo-normal of the closest feature from the barycentrics
        eps = 1e-12
        f = best_tri
        if bu > eps and bv > eps and bw > eps:
            nx, ny, nz = face_n[f, 0], face_n[f, 1], face_n[f, 2]
        elif bu <= eps and bv <= eps:
            nx, ny, nz = face_vert_n[f, 2, 0], face_vert_n[f, 2, 1], face_vert_n[f, 2, 2]
        elif bv <= eps and bw <= eps:
            nx, ny, nz = face_vert_n[f, 0, 0], face_vert_n[f, 0, 1], face_vert_n[f, 0, 2]
        elif bw <= eps and bu <= eps:
            nx, ny, nz = face_vert_n[f, 1, 0], face_vert_n[f, 1, 1], face_vert_n[f, 1, 2]
        elif bw <= eps:
            # on edge corner0-corner1
            nx, ny, nz = face_edge_n[f, 0, 0], face_edge_n[f, 0, 1], face_edge_n[f, 0, 2]
        elif bu <= eps:
            nx, ny, nz = face_edge_n[f, 1, 0], face_edge_n[f, 1, 1], face_edge_n[f, 1, 2]
        else:
            nx, ny, nz = face_edge_n[f, 2, 0], face_edge_n[f, 2, 1], face_edge_n[f, 2, 2]

        dxq = px - bcx
        dyq = py - bcy
        dzq = pz - bcz
        side = dxq * nx + dyq * ny + dzq * nz
        dist = np.sqrt(best)
        out_dist[qi] = -dist if side < 0.0 else dist
        out_closest[qi, 0] = bcx
        out_closest[qi, 1] = bcy
        out_closest[qi, 2] = bcz


class MeshSdf:
    """Immutable acceleration structure for signed distance queries."""

    def __init__(self, mesh: MeshData):
        self.mesh = mesh
        verts = np.ascontiguousarray(mesh.vertices, dtype=np.float64)
        tris = np.ascontiguousarray(mesh.triangles, dtype=np.int64)
        face_n, areas = _face_normals_and_areas(verts, tris)
        face_vert_n, face_edge_n, report = _pseudo_normals(verts, tris, face_n)
        (lo, hi, left, right, start, cnt, order) = _build_bvh(verts, tris)
        self._verts = verts
        self._tris = tris
        self._face_n = np.ascontiguousarray(face_n)
        self._face_vert_n = np.ascontiguousarray(face_vert_n)
        self._face_edge_n = np.ascontiguousarray(face_edge_n)
        self._node_lo = lo
        self._node_hi = hi
        self._node_left = left
        self._node_right = right
        self._node_start = start
        self._node_count = cnt
        self._order = order
        self.face_areas = areas
        self.report = report

    def signed_distance_many(self, points: np.ndarray, return_closest: bool = False):
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        dist = np.empty(len(pts), dtype=np.float64)
        closest = np.empty((len(pts), 3), dtype=np.float64)
        _query_kernel(
            pts,
            self._verts,
            self._tris,
            self._order,
            self._node_lo,
            self._node_hi,
            self._node_left,
            self._node_right,
            self._node_start,
            self._node_count,
            self._face_n,
            self._face_vert_n,
            self._face_edge_n,
            dist,
            closest,
        )
        if return_closest:
            return dist, closest
        return dist

    def signed_distance(self, q) -> float:
        return float(self.signed_distance_many(np.asarray(q, dtype=np.float64)[None, :])[0])


def sample_grid(sdf: MeshSdf, spec: GridSpec) -> SdfGrid:
    """Signed distance at every lattice vertex; pure per-vertex, so deterministic."""
    pts = spec.vertex_positions().reshape(-1, 3)
    values = sdf.signed_distance_many(pts)
    m = spec.verts_per_axis
    return SdfGrid(spec=spec, values=values.reshape(m, m, m))
