"""Compactly supported deformers aligned to the field's Hessian frame.

A deformer adds beta * B(W^-1 Q^T (q - s)) to the field: a tensor-product
bump anchored at s, rotated into the frame Q and stretched by the per-axis
weights W. Support is the open box ||W^-1 Q^T (q - s)||_inf < 2 and the bump
is exactly zero outside, so edits are local and removable without residue.

Topology deformers anchor at saddles and choose beta so the saddle value's
sign flips; geometry deformers anchor at surface points and bulge or dent
along the surface normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .critical import CriticalPoint, jacobi_eigh3
from .spline import SplineField, FieldSample, bspline_b, bspline_b_d1, bspline_b_d2

B0_CUBED = bspline_b(0.0) ** 3  # peak of the trivariate bump, 8/27

SURFACE_TOL = 1e-6
PROJECT_MAX_ITER = 50
GRAD_FLOOR = 1e-6  # below this the flow step is meaningless; use the ray fallback
WEIGHT_MAX = 0.5


class ProjectionError(RuntimeError):
    """Gradient flow failed to reach the surface from the given start."""


@dataclass(frozen=True)
class DeformerParams:
    """Topology-editing knobs: widths in units of |F(s)| and w, amplitude in F(s)."""

    mu: float = 2.0
    phi: float = 4.0
    rho: float = 5.0

    def validate(self):
        if not (self.mu > 0 and self.phi > 0):
            raise ValueError("mu and phi must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")


@dataclass(frozen=True)
class Deformer:
    """One bump: frame, weights, amplitude, plus what is needed to retune it."""

    id: int
    kind: str  # topology | bulge | concavity
    anchor: np.ndarray  # (3,)
    frame: np.ndarray  # (3, 3), columns are the deformer axes, det +1
    weights: np.ndarray  # (3,)
    beta: float
    anchor_value: float  # field value at the anchor when built
    frame_eigenvalues: np.ndarray  # (3,) Hessian eigenvalues in frame-axis order
    params: dict  # knobs used to build; retune recomputes weights/beta from these
    mode: str = "hessian"  # hessian | normal-based

    def support_aabb(self) -> tuple[np.ndarray, np.ndarray]:
        """World-axis bounding box of the support: s +- 2 * |Q| W."""
        half = 2.0 * np.abs(self.frame) @ self.weights
        return self.anchor - half, self.anchor + half

    def local_coords(self, points: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(points) - self.anchor
        return (rel @ self.frame) / self.weights

    def inside_support(self, points: np.ndarray) -> np.ndarray:
        return np.all(np.abs(self.local_coords(points)) < 2.0, axis=1)

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Bump values; exact zero outside the support box."""
        pts = np.atleast_2d(points)
        t = self.local_coords(pts)
        inside = np.all(np.abs(t) < 2.0, axis=1)
        out = np.zeros(len(pts), dtype=np.float64)
        if np.any(inside):
            ti = t[inside]
            out[inside] = self.beta * (
                bspline_b(ti[:, 0]) * bspline_b(ti[:, 1]) * bspline_b(ti[:, 2])
            )
        return out

    def eval_full_many(self, points: np.ndarray):
        """Value, gradient and Hessian contributions via the chain rule."""
        pts = np.atleast_2d(points)
        t = self.local_coords(pts)
        inside = np.all(np.abs(t) < 2.0, axis=1)
        m = len(pts)
        val = np.zeros(m, dtype=np.float64)
        grad = np.zeros((m, 3), dtype=np.float64)
        hess = np.zeros((m, 3, 3), dtype=np.float64)
        if not np.any(inside):
            return val, grad, hess
        ti = t[inside]
        b = bspline_b(ti)
        d1 = bspline_b_d1(ti)
        d2 = bspline_b_d2(ti)
        val[inside] = self.beta * b[:, 0] * b[:, 1] * b[:, 2]

        gt = np.stack(
            [
                d1[:, 0] * b[:, 1] * b[:, 2],
                b[:, 0] * d1[:, 1] * b[:, 2],
                b[:, 0] * b[:, 1] * d1[:, 2],
            ],
            axis=1,
        )
        ht = np.empty((len(ti), 3, 3), dtype=np.float64)
        ht[:, 0, 0] = d2[:, 0] * b[:, 1] * b[:, 2]
        ht[:, 1, 1] = b[:, 0] * d2[:, 1] * b[:, 2]
        ht[:, 2, 2] = b[:, 0] * b[:, 1] * d2[:, 2]
        ht[:, 0, 1] = ht[:, 1, 0] = d1[:, 0] * d1[:, 1] * b[:, 2]
        ht[:, 0, 2] = ht[:, 2, 0] = d1[:, 0] * b[:, 1] * d1[:, 2]
        ht[:, 1, 2] = ht[:, 2, 1] = b[:, 0] * d1[:, 1] * d1[:, 2]

        qw = self.frame / self.weights[None, :]  # Q W^-1, maps d/dt to d/dq
        grad[inside] = self.beta * gt @ qw.T
        hess[inside] = self.beta * np.einsum("ai,nij,bj->nab", qw, ht, qw)
        return val, grad, hess


class CompositeField:
    """Base spline field plus an immutable deformer stack.

    Evaluation sums deformers in ascending-id order, so equal stacks give
    bitwise-equal results regardless of interaction history.
    """

    def __init__(self, base: SplineField, deformers=()):
        self.base = base
        self.deformers = tuple(sorted(deformers, key=lambda d: d.id))
        self.spec = base.spec

    def with_deformer(self, d: Deformer) -> "CompositeField":
        if any(existing.id == d.id for existing in self.deformers):
            raise ValueError(f"duplicate deformer id {d.id}")
        return CompositeField(self.base, self.deformers + (d,))

    def without_deformer(self, deformer_id: int) -> "CompositeField":
        kept = tuple(d for d in self.deformers if d.id != deformer_id)
        if len(kept) == len(self.deformers):
            raise KeyError(f"no deformer with id {deformer_id}")
        return CompositeField(self.base, kept)

    def replace_deformer(self, d: Deformer) -> "CompositeField":
        if all(existing.id != d.id for existing in self.deformers):
            raise KeyError(f"no deformer with id {d.id}")
        kept = tuple(x for x in self.deformers if x.id != d.id)
        return CompositeField(self.base, kept + (d,))

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        vals = self.base.eval_many(pts)
        for d in self.deformers:
            inside = d.inside_support(pts)
            if np.any(inside):
                vals[inside] += d.eval_many(pts[inside])
        return vals

    def eval(self, q) -> float:
        return float(self.eval_many(np.asarray(q, dtype=np.float64)[None, :])[0])

    def eval_full_many(self, points: np.ndarray):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        val, grad, hess, outside = self.base.eval_full_many(pts)
        for d in self.deformers:
            inside = d.inside_support(pts)
            if np.any(inside):
                dv, dg, dh = d.eval_full_many(pts[inside])
                val[inside] += dv
                grad[inside] += dg
                hess[inside] += dh
        return val, grad, hess, outside

    def eval_full(self, q) -> FieldSample:
        val, grad, hess, outside = self.eval_full_many(np.asarray(q, dtype=np.float64)[None, :])
        return FieldSample(float(val[0]), grad[0], hess[0], bool(outside[0]))

    def gradient_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        grad = self.base.gradient_many(pts)
        for d in self.deformers:
            inside = d.inside_support(pts)
            if np.any(inside):
                _, dg, _ = d.eval_full_many(pts[inside])
                grad[inside] += dg
        return grad

    def domain_aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.base.domain_aabb()


# -- surface anchoring -----------------------------------------------------


def project_to_surface(field, s, tol: float = SURFACE_TOL) -> np.ndarray:
    """Slide s onto the zero level set by damped gradient flow.

    Raises ProjectionError when the gradient vanishes (critical start) or the
    flow stalls; callers recover with the eigenvector-ray fallback.
    """
    q = np.asarray(s, dtype=np.float64).copy()
    f = field.eval(q)
    if abs(f) <= tol:
        return q
    for _ in range(PROJECT_MAX_ITER):
        sample = field.eval_full(q)
        f = sample.value
        if abs(f) <= tol:
            return q
        g = sample.gradient
        gn2 = float(g @ g)
        if np.sqrt(gn2) < GRAD_FLOOR:
            raise ProjectionError(f"gradient too small ({np.sqrt(gn2):.3e}) at {q}")
        step = (f / gn2) * g
        scale = 1.0
        for _ in range(30):
            cand = q - scale * step
            if abs(field.eval(cand)) < abs(f):
                q = cand
                break
            scale *= 0.5
        else:
            raise ProjectionError(f"flow stalled at {q} with |F|={abs(f):.3e}")
    f = field.eval(q)
    if abs(f) <= tol:
        return q
    raise ProjectionError(f"no convergence after {PROJECT_MAX_ITER} iterations, |F|={abs(f):.3e}")


def surface_by_ray(field, s, direction, step: float, tol: float = SURFACE_TOL) -> np.ndarray:
    """March from s along +-direction to a sign change, then bisect.

    Checks the + side first at each radius, so the nearer crossing wins and
    ties resolve deterministically.
    """
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(direction, dtype=np.float64)
    v = v / np.linalg.norm(v)
    f0 = field.eval(s)
    if abs(f0) <= tol:
        return s.copy()
    sign0 = np.sign(f0)
    max_t = 2.0  # longer than any chord of the data cube

    t = step
    bracket = None
    while t <= max_t:
        for sgn in (1.0, -1.0):
            p = s + sgn * t * v
            # beyond the data cube the truncated interpolant decays to exact
            # zero, which would read as a phantom crossing; normalization
            # keeps real surfaces strictly inside
            if np.any(p < 0.0) or np.any(p > 1.0):
                continue
            if np.sign(field.eval(p)) != sign0:
                bracket = (s + sgn * (t - step) * v, p)
                break
        if bracket is not None:
            break
        t += step
    if bracket is None:
        raise ProjectionError("no zero crossing along the ray")

    a, b = bracket
    fa = field.eval(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = field.eval(mid)
        if abs(fm) <= tol:
            return mid
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def anchor_on_surface(field, cp: CriticalPoint) -> np.ndarray:
    """Surface point nearest-ish to a critical point: flow, then ray fallback.

    At a critical point the flow has no descent direction, so the fallback
    marches along the first eigenvector (steepest curvature descent), which
    for a saddle points at the bounding surface patches.
    """
    try:
        return project_to_surface(field, cp.position)
    except ProjectionError:
        return surface_by_ray(
            field, cp.position, cp.eigenvectors[:, 0], step=field.spec.w / 2.0
        )


# -- topology deformers ----------------------------------------------------


def select_frame_topology(cp: CriticalPoint, s_prime) -> tuple[np.ndarray, np.ndarray]:
    """Deformer frame at a saddle: axis one toward the surface anchor.

    Returns (Q, eigenvalues-in-frame-order). Axis one is the eigenvector most
    aligned with s' - s, pointed toward s'; axis two is the remaining
    eigenvector whose eigenvalue sign opposes axis one's (both opposing: the
    larger |lambda|); axis three completes a right-handed frame.
    """
    s_prime = np.asarray(s_prime, dtype=np.float64)
    dirv = s_prime - cp.position
    norm = np.linalg.norm(dirv)
    if norm == 0.0:
        raise ValueError("surface anchor coincides with the critical point")
    dirv = dirv / norm

    cos = np.abs(cp.eigenvectors.T @ dirv)
    best = float(np.max(cos))
    first = int(np.flatnonzero(cos >= best - 1e-9)[0])  # tie -> smaller index

    e1 = cp.eigenvectors[:, first].copy()
    if float(e1 @ dirv) < 0.0:
        e1 = -e1
    lam = cp.eigenvalues
    rest = [i for i in range(3) if i != first]
    opposite = [i for i in rest if np.sign(lam[i]) != np.sign(lam[first])]
    if len(opposite) == 1:
        second = opposite[0]
    elif len(opposite) == 2:
        second = opposite[0] if abs(lam[opposite[0]]) >= abs(lam[opposite[1]]) else opposite[1]
    else:
        second = rest[0] if abs(lam[rest[0]]) >= abs(lam[rest[1]]) else rest[1]
    third = next(i for i in rest if i != second)

    e2 = cp.eigenvectors[:, second].copy()
    e3 = cp.eigenvectors[:, third].copy()
    q = np.stack([e1, e2, e3], axis=1)
    if np.linalg.det(q) < 0.0:
        q[:, 2] = -q[:, 2]
    return q, np.array([lam[first], lam[second], lam[third]])


def _clamp_weight(value: float, w: float) -> float:
    return float(min(max(value, w / 2.0), WEIGHT_MAX))


def default_weights_topology(
    w: float, anchor_value: float, frame_eigenvalues: np.ndarray, params: DeformerParams
) -> np.ndarray:
    """Axis weights from the saddle value, grid spacing and curvature ratios.

    Axis three copies whichever earlier axis shares its eigenvalue sign,
    scaled by the |eigenvalue| ratio; everything clamps to [w/2, 0.5] so
    near-zero eigenvalues cannot blow the footprint up.
    """
    l1, l2, l3 = frame_eigenvalues
    w1 = params.mu * abs(anchor_value)
    w2 = params.phi * w
    if np.sign(l3) == np.sign(l1) and l1 != 0.0:
        w3 = w1 * abs(l3 / l1)
    elif l2 != 0.0:
        w3 = w2 * abs(l3 / l2)
    else:
        w3 = w2
    return np.array([_clamp_weight(w1, w), _clamp_weight(w2, w), _clamp_weight(w3, w)])


def build_topology_deformer(
    field, cp: CriticalPoint, params: DeformerParams = DeformerParams(), deformer_id: int = 0
) -> Deformer:
    """Deformer that flips (for rho > 27/8) the field sign at the saddle."""
    if not cp.is_saddle:
        raise ValueError(f"topology deformers require a saddle, got {cp.cls}")
    params.validate()
    s_prime = anchor_on_surface(field, cp)
    frame, lam = select_frame_topology(cp, s_prime)
    anchor_value = field.eval(cp.position)
    weights = default_weights_topology(field.spec.w, anchor_value, lam, params)
    beta = -params.rho * anchor_value
    return Deformer(
        id=deformer_id,
        kind="topology",
        anchor=np.asarray(cp.position, dtype=np.float64).copy(),
        frame=frame,
        weights=weights,
        beta=beta,
        anchor_value=anchor_value,
        frame_eigenvalues=lam,
        params={"mu": params.mu, "phi": params.phi, "rho": params.rho},
    )


def retune_topology(deformer: Deformer, params: DeformerParams, w: float) -> Deformer:
    """Same anchor/frame, new widths and amplitude; pure algebra, no re-search."""
    params.validate()
    weights = default_weights_topology(
        w, deformer.anchor_value, deformer.frame_eigenvalues, params
    )
    return Deformer(
        id=deformer.id,
        kind=deformer.kind,
        anchor=deformer.anchor,
        frame=deformer.frame,
        weights=weights,
        beta=-params.rho * deformer.anchor_value,
        anchor_value=deformer.anchor_value,
        frame_eigenvalues=deformer.frame_eigenvalues,
        params={"mu": params.mu, "phi": params.phi, "rho": params.rho},
        mode=deformer.mode,
    )


def flip_threshold(field, s) -> float:
    """Amplitude at which the composite value at s reaches zero: -F(s)/B(0)."""
    return -field.eval(s) / B0_CUBED


# -- geometry deformers ----------------------------------------------------


def _orthonormal_completion(e1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic right-handed completion of a unit vector."""
    pivot = int(np.argmin(np.abs(e1)))
    axis = np.zeros(3)
    axis[pivot] = 1.0
    e2 = np.cross(axis, e1)
    e2 /= np.linalg.norm(e2)
    e3 = np.cross(e1, e2)
    return e2, e3


def build_geometry_deformer(
    field,
    p,
    kind: str,
    radius: float | None = None,
    rho: float = 5.0,
    deformer_id: int = 0,
    force_normal_mode: bool = False,
) -> Deformer:
    """Bulge or dent the surface at p, footprint following principal curvatures.

    Axis one is the smallest-|eigenvalue| direction of the Hessian (the
    normal for a distance-like field), oriented outward by the gradient; the
    lateral weights keep the inverse curvature ratio so the footprint runs
    long where the surface is flat. Amplitude is +-rho*w: grid-relative, so
    edits look alike across resolutions.
    """
    if kind not in ("bulge", "concavity"):
        raise ValueError(f"geometry deformer kind must be bulge or concavity, got {kind!r}")
    if rho < 0:
        raise ValueError("rho must be non-negative")
    p = np.asarray(p, dtype=np.float64)
    w = field.spec.w
    if radius is None:
        radius = 4.0 * w
    if radius <= 0:
        raise ValueError("radius must be positive")
    sample = field.eval_full(p)
    if abs(sample.value) > 1e-4:
        raise ValueError(f"anchor is not on the surface: |F(p)| = {abs(sample.value):.3e}")
    grad = sample.gradient
    gn = np.linalg.norm(grad)
    if gn < GRAD_FLOOR:
        raise ValueError("gradient vanishes at the anchor; cannot orient the deformer")

    eigvals, eigvecs = jacobi_eigh3(sample.hessian)
    absl = np.abs(eigvals)
    order = np.argsort(absl, kind="stable")
    tie = absl[order[1]] - absl[order[0]] < 1e-9 * max(1.0, absl[order[2]])
    mode = "normal-based" if (force_normal_mode or tie) else "hessian"

    if mode == "normal-based":
        e1 = grad / gn
        e2, e3 = _orthonormal_completion(e1)
        lam = np.zeros(3)
        weights = np.array([_clamp_weight(radius, w)] * 3)
    else:
        normal_idx = int(order[0])
        e1 = eigvecs[:, normal_idx].copy()
        if float(e1 @ grad) < 0.0:
            e1 = -e1
        lat = [i for i in range(3) if i != normal_idx]
        la, lb = (lat[0], lat[1]) if absl[lat[0]] <= absl[lat[1]] else (lat[1], lat[0])
        e2 = eigvecs[:, la].copy()
        e3 = eigvecs[:, lb].copy()
        lam = np.array([eigvals[normal_idx], eigvals[la], eigvals[lb]])
        ratio = absl[la] / absl[lb] if absl[lb] > 0.0 else 1.0
        weights = np.array(
            [
                _clamp_weight(radius, w),
                _clamp_weight(radius, w),
                _clamp_weight(radius * ratio, w),
            ]
        )

    q = np.stack([e1, e2, e3], axis=1)
    if np.linalg.det(q) < 0.0:
        q[:, 2] = -q[:, 2]

    sign_factor = 1.0 if kind == "bulge" else -1.0
    beta = -sign_factor * rho * w
    return Deformer(
        id=deformer_id,
        kind=kind,
        anchor=p.copy(),
        frame=q,
        weights=weights,
        beta=beta,
        anchor_value=sample.value,
        frame_eigenvalues=lam,
        params={"radius": float(radius), "rho": float(rho)},
        mode=mode,
    )


def retune_geometry(deformer: Deformer, radius: float, rho: float, w: float) -> Deformer:
    """Rescale an existing geometry deformer's footprint and amplitude."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if rho < 0:
        raise ValueError("rho must be non-negative")
    lam = deformer.frame_eigenvalues
    if deformer.mode == "normal-based":
        weights = np.array([_clamp_weight(radius, w)] * 3)
    else:
        ratio = abs(lam[1]) / abs(lam[2]) if abs(lam[2]) > 0.0 else 1.0
        weights = np.array(
            [
                _clamp_weight(radius, w),
                _clamp_weight(radius, w),
                _clamp_weight(radius * ratio, w),
            ]
        )
    sign_factor = 1.0 if deformer.kind == "bulge" else -1.0
    return Deformer(
        id=deformer.id,
        kind=deformer.kind,
        anchor=deformer.anchor,
        frame=deformer.frame,
        weights=weights,
        beta=-sign_factor * rho * w,
        anchor_value=deformer.anchor_value,
        frame_eigenvalues=lam,
        params={"radius": float(radius), "rho": float(rho)},
        mode=deformer.mode,
    )
