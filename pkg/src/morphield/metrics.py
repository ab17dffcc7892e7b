"""Surface comparison metrics and mesh topology counts.

Chamfer/F-score/normal agreement operate on area-uniform point samples with a
fixed seed, so identical meshes produce identical sample sets and the
identity comparisons come out exact. Topology counts use exact connectivity,
not sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 20240601
DEFAULT_FSCORE_THRESHOLD = 0.01


@dataclass(frozen=True)
class MetricsReport:
    chamfer: float  # L1, scaled by 1e3
    f_score: float  # percent
    normal_consistency: float  # percent
    genus_per_component: list  # int, or None where undefined
    component_count: int
    samples: int
    seed: int
    f_score_threshold: float

    def to_dict(self) -> dict:
        return {
            "chamfer_l1_x1000": self.chamfer,
            "f_score_percent": self.f_score,
            "normal_consistency_percent": self.normal_consistency,
            "genus_per_component": self.genus_per_component,
            "component_count": self.component_count,
            "samples": self.samples,
            "seed": self.seed,
            "f_score_threshold": self.f_score_threshold,
        }


def surface_samples(mesh, count: int, seed: int = DEFAULT_SEED):
    """Area-uniform point samples with their face normals, deterministic."""
    if count < 1:
        raise ValueError("need at least one sample")
    verts = mesh.vertices
    tris = mesh.triangles
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    cross = np.cross(b - a, c - a)
    area = 0.5 * np.linalg.norm(cross, axis=1)
    total = area.sum()
    if total <= 0.0:
        raise ValueError("mesh has zero surface area")

    rng = np.random.default_rng(seed)
    face_idx = rng.choice(len(tris), size=count, p=area / total)
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    points = a[face_idx] + u[:, None] * (b - a)[face_idx] + v[:, None] * (c - a)[face_idx]

    normals = cross[face_idx]
    norm = np.linalg.norm(normals, axis=1)
    normals = normals / np.where(norm > 0.0, norm, 1.0)[:, None]
    return points, normals


def chamfer_l1(a_mesh, b_mesh, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED) -> float:
    """Symmetric mean L1 nearest-sample distance, times 1000."""
    pa, _ = surface_samples(a_mesh, samples, seed)
    pb, _ = surface_samples(b_mesh, samples, seed)
    da = cKDTree(pb).query(pa, p=1)[0]
    db = cKDTree(pa).query(pb, p=1)[0]
    return float(0.5 * (da.mean() + db.mean()) * 1e3)


def f_score(
    a_mesh,
    b_mesh,
    threshold: float = DEFAULT_FSCORE_THRESHOLD,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
) -> float:
    """Harmonic mean of precision/recall at a Euclidean distance threshold, in percent."""
    pa, _ = surface_samples(a_mesh, samples, seed)
    pb, _ = surface_samples(b_mesh, samples, seed)
    precision = float(np.mean(cKDTree(pb).query(pa)[0] <= threshold))
    recall = float(np.mean(cKDTree(pa).query(pb)[0] <= threshold))
    if precision + recall == 0.0:
        return 0.0
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def normal_consistency(
    a_mesh, b_mesh, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED
) -> float:
    """Mean |cos| between paired sample normals, symmetrized, in percent."""
    pa, na = surface_samples(a_mesh, samples, seed)
    pb, nb = surface_samples(b_mesh, samples, seed)
    ia = cKDTree(pb).query(pa)[1]
    ib = cKDTree(pa).query(pb)[1]
    fwd = np.abs(np.einsum("ij,ij->i", na, nb[ia])).mean()
    rev = np.abs(np.einsum("ij,ij->i", nb, na[ib])).mean()
    return float(100.0 * 0.5 * (fwd + rev))


def topology_counts(mesh) -> tuple[list, int]:
    """Per-component genus (None when open/non-manifold) and component count.

    Components connect through shared edges; genus comes from V - E + F on
    each closed 2-manifold component.
    """
    tris = mesh.triangles
    f = len(tris)
    ev0 = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
    ev1 = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0]])
    key = np.stack([np.minimum(ev0, ev1), np.maximum(ev0, ev1)], axis=1)
    uniq_edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    face_of_edge_slot = np.tile(np.arange(f, dtype=np.int64), 3)

    # adjacency between the two faces of every interior manifold edge
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    sorted_faces = face_of_edge_slot[order]
    starts = np.searchsorted(sorted_edges, np.arange(len(uniq_edges)))
    pair_rows = []
    pair_cols = []
    for e in np.flatnonzero(counts == 2):
        s = starts[e]
        pair_rows.append(sorted_faces[s])
        pair_cols.append(sorted_faces[s + 1])
    adj = coo_matrix(
        (np.ones(len(pair_rows)), (pair_rows, pair_cols)), shape=(f, f)
    )
    n_comp, labels = connected_components(adj, directed=False)

    # an open or non-manifold edge spoils the genus of every component it touches
    dirty = np.zeros(n_comp, dtype=bool)
    for e in np.flatnonzero(counts != 2):
        for s in range(starts[e], starts[e] + counts[e]):
            dirty[labels[sorted_faces[s]]] = True

    edge_label = labels[sorted_faces[starts]]  # component of each unique edge
    genus: list = []
    for comp in range(n_comp):
        if dirty[comp]:
            genus.append(None)
            continue
        face_mask = labels == comp
        comp_edges = edge_label == comp
        v = len(np.unique(tris[face_mask]))
        e = int(np.count_nonzero(comp_edges))
        faces = int(np.count_nonzero(face_mask))
        chi = v - e + faces
        genus.append(int((2 - chi) // 2))
    return genus, int(n_comp)


def compare_meshes(
    a_mesh,
    b_mesh,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    threshold: float = DEFAULT_FSCORE_THRESHOLD,
) -> MetricsReport:
    """All metrics of a against b, plus a's topology counts."""
    genus, n_comp = topology_counts(a_mesh)
    return MetricsReport(
        chamfer=chamfer_l1(a_mesh, b_mesh, samples, seed),
        f_score=f_score(a_mesh, b_mesh, threshold, samples, seed),
        normal_consistency=normal_consistency(a_mesh, b_mesh, samples, seed),
        genus_per_component=genus,
        component_count=n_comp,
        samples=samples,
        seed=seed,
        f_score_threshold=threshold,
    )
