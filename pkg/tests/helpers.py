"""Shared test oracles.

Everything here locates or measures field features without touching the code
paths under test: critical points come from dense value scans plus numpy
differencing, eigen-decompositions from numpy.linalg, surface crossings from
bisection on values only.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from morphield.spline import GridSpec, SdfGrid, SplineField, fit_field


def fit_sdf(fn, n: int, tol: float = 1e-8) -> SplineField:
    """Fit the interpolant of an analytic SDF sampled at the grid vertices."""
    spec = GridSpec(n)
    g = spec.vertex_positions()
    vals = np.asarray(fn(g.reshape(-1, 3)), dtype=np.float64).reshape(g.shape[:3])
    field, report = fit_field(SdfGrid(spec, vals), tol=tol)
    assert report.converged, f"fit did not converge: residual {report.residual:.3e}"
    return field


def interior_points(field, count: int, seed: int, depth_cells: int = 4,
                    frac_pad: float = 0.05, exclude_center_radius: float = 0.0):
    """Random points suited to finite-difference oracles.

    Cells at least ``depth_cells`` from the boundary (outside the truncated
    system's ringing layer), fractional offsets inside [frac_pad, 1-frac_pad]
    so an h = w/100 stencil never straddles a knot plane, and optionally a
    ball around the cube center excluded (data kinks live there in the test
    scenes).
    """
    n = field.spec.n
    w = field.spec.w
    rng = np.random.default_rng(seed)
    out = np.empty((0, 3))
    while len(out) < count:
        cells = rng.integers(depth_cells, n - depth_cells, (2 * count, 3))
        frac = rng.uniform(frac_pad, 1.0 - frac_pad, (2 * count, 3))
        pts = (cells + frac) * w
        if exclude_center_radius > 0.0:
            keep = np.linalg.norm(pts - 0.5, axis=1) > exclude_center_radius
            pts = pts[keep]
        out = np.vstack([out, pts])
    return out[:count]


def fd_gradient(eval_many, pts: np.ndarray, h: float) -> np.ndarray:
    """Central differences of field values."""
    out = np.empty_like(pts)
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = h
        out[:, ax] = (eval_many(pts + e) - eval_many(pts - e)) / (2.0 * h)
    return out


def fd_hessian_of_gradient(gradient_many, pts: np.ndarray, h: float) -> np.ndarray:
    """Central differences of analytic gradients, row a = d(grad)/dx_a."""
    out = np.empty((len(pts), 3, 3))
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = h
        out[:, ax, :] = (gradient_many(pts + e) - gradient_many(pts - e)) / (2.0 * h)
    return out


def dense_volume(field, resolution: int, chunk: int = 200_000) -> np.ndarray:
    """Field values on a (resolution+1)^3 lattice via the numpy eval path."""
    ax = np.linspace(0.0, 1.0, resolution + 1)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    vals = np.empty(len(pts))
    for lo in range(0, len(pts), chunk):
        hi = min(lo + chunk, len(pts))
        vals[lo:hi] = field.eval_many(pts[lo:hi])
    return vals.reshape((resolution + 1,) * 3)


def scan_gradnorm_minima(vol: np.ndarray, h: float, gn_cut: float,
                         margin_points: int = 4):
    """Local minima of |grad| on a dense value lattice; the brute-force oracle.

    Gradients are numpy central differences of the values: no analytic
    derivative code involved. Returns (positions, grad_norms) of all interior
    27-neighborhood local minima with |grad| below the cut, ``margin_points``
    lattice steps kept away from the domain boundary.
    """
    gn2 = np.zeros(vol.shape, dtype=np.float64)
    for axis in range(3):
        g = np.gradient(vol, h, axis=axis)
        gn2 += g * g
    gn = np.sqrt(gn2)
    is_min = gn <= ndimage.minimum_filter(gn, size=3, mode="nearest")
    is_min[:margin_points] = is_min[-margin_points:] = False
    is_min[:, :margin_points] = is_min[:, -margin_points:] = False
    is_min[:, :, :margin_points] = is_min[:, :, -margin_points:] = False
    idx = np.argwhere(is_min & (gn < gn_cut))
    return idx * h, gn[tuple(idx.T)]


def fd_hessian_from_volume(vol: np.ndarray, ijk, h: float) -> np.ndarray:
    """Second differences of dense values at one lattice point."""
    i, j, k = (int(x) for x in ijk)
    hess = np.empty((3, 3))

    def v(di, dj, dk):
        return vol[i + di, j + dj, k + dk]

    hess[0, 0] = (v(1, 0, 0) - 2 * v(0, 0, 0) + v(-1, 0, 0)) / h**2
    hess[1, 1] = (v(0, 1, 0) - 2 * v(0, 0, 0) + v(0, -1, 0)) / h**2
    hess[2, 2] = (v(0, 0, 1) - 2 * v(0, 0, 0) + v(0, 0, -1)) / h**2
    hess[0, 1] = hess[1, 0] = (v(1, 1, 0) - v(1, -1, 0) - v(-1, 1, 0) + v(-1, -1, 0)) / (4 * h**2)
    hess[0, 2] = hess[2, 0] = (v(1, 0, 1) - v(1, 0, -1) - v(-1, 0, 1) + v(-1, 0, -1)) / (4 * h**2)
    hess[1, 2] = hess[2, 1] = (v(0, 1, 1) - v(0, 1, -1) - v(0, -1, 1) + v(0, -1, -1)) / (4 * h**2)
    return hess


def classify_by_eigh(hess: np.ndarray) -> str:
    """Independent classification: numpy eigensolver plus the sign-count rule."""
    lam = np.linalg.eigvalsh(hess)
    if np.any(np.abs(lam) < 1e-6 * np.max(np.abs(lam))):
        return "degenerate"
    return ("minimum", "saddle1", "saddle2", "maximum")[int(np.sum(lam < 0.0))]


def cluster_positions(positions: np.ndarray, radius: float) -> list[np.ndarray]:
    """Greedy clustering of near-duplicate scan hits; returns representatives."""
    reps: list[np.ndarray] = []
    for p in positions:
        if all(np.linalg.norm(p - r) >= radius for r in reps):
            reps.append(p)
    return reps


def argmin_refine(eval_many, center, half_width: float, rounds: int = 6,
                  pts_per_axis: int = 11) -> np.ndarray:
    """Locate a local minimum of the field by shrinking dense argmin scans.

    Value-only oracle: each round evaluates a pts_per_axis^3 lattice and
    recenters on the argmin, shrinking the window 5x. Resolution after k
    rounds is half_width * (2/ (pts_per_axis-1)) * 5^-(k-1)-ish; six rounds
    from half_width w reach well below 1e-6.
    """
    c = np.asarray(center, dtype=np.float64).copy()
    hw = half_width
    for _ in range(rounds):
        ax = np.linspace(-hw, hw, pts_per_axis)
        gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
        pts = c + np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
        vals = eval_many(pts)
        c = pts[int(np.argmin(vals))]
        hw /= 5.0
    return c


def bisect_zero(eval_fn, a: np.ndarray, b: np.ndarray, iters: int = 80) -> np.ndarray:
    """Bisect the segment [a, b] for a sign change of the field value."""
    fa = eval_fn(a)
    fb = eval_fn(b)
    assert np.sign(fa) != np.sign(fb), "endpoints do not bracket a crossing"
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = eval_fn(mid)
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)
