"""Cubic trivariate tensor-product B-spline field over a regular unit-cube lattice.

The field is F(q) = sum_ijk alpha_ijk * B((q - g_ijk) / w) with B the separable
product b(x)b(y)b(z) of the cardinal cubic B-spline b. Coefficients are found
by interpolating sampled values at the grid vertices, which yields a symmetric
sparse system solved with conjugate gradients. Value, gradient and Hessian are
all analytic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Univariate basis values at integer offsets: b(0), b(+-1), b(+-2).
B0 = 2.0 / 3.0
B1 = 1.0 / 6.0

# Offsets of the four bases whose support can contain a point of a cell.
_STENCIL = np.array([-1, 0, 1, 2], dtype=np.int64)


def bspline_b(t):
    """Cardinal cubic B-spline basis; C2, supported on (-2, 2), b(0) = 2/3."""
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    inner = 0.5 * a**3 - a**2 + 2.0 / 3.0
    outer = (2.0 - a) ** 3 / 6.0
    out = np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))
    if out.ndim == 0:
        return float(out)
    return out


def bspline_b_d1(t):
    """First derivative of ``bspline_b``; odd, C1."""
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    inner = 1.5 * a**2 - 2.0 * a
    outer = -0.5 * (2.0 - a) ** 2
    mag = np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))
    out = np.sign(t) * mag
    if out.ndim == 0:
        return float(out)
    return out


def bspline_b_d2(t):
    """Second derivative of ``bspline_b``; even, C0."""
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    inner = 3.0 * a - 2.0
    outer = 2.0 - a
    out = np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class GridSpec:
    """Regular lattice over the unit cube: ``n`` cells per axis, spacing 1/n."""

    n: int

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid must have at least 8 cells per axis, got n={self.n}")

    @property
    def w(self) -> float:
        return 1.0 / self.n

    @property
    def verts_per_axis(self) -> int:
        return self.n + 1

    @property
    def vertex_count(self) -> int:
        return (self.n + 1) ** 3

    def vertex_positions(self) -> np.ndarray:
        """All grid vertices as an (n+1, n+1, n+1, 3) array, index order (i, j, k)."""
        ax = np.arange(self.n + 1, dtype=np.float64) * self.w
        gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)


@dataclass(frozen=True)
class SdfGrid:
    """Signed distances sampled at every grid vertex (negative inside)."""

    spec: GridSpec
    values: np.ndarray  # (n+1, n+1, n+1), index order (i, j, k) = (x, y, z)

    def __post_init__(self):
        m = self.spec.verts_per_axis
        if self.values.shape != (m, m, m):
            raise ValueError(f"values shape {self.values.shape} does not match n={self.spec.n}")


def basis_value(spec: GridSpec, ijk, q) -> float:
    """Evaluate the basis rooted at lattice index ``ijk`` at point ``q``."""
    g = np.asarray(ijk, dtype=np.float64) * spec.w
    t = (np.asarray(q, dtype=np.float64) - g) / spec.w
    return float(bspline_b(t[0]) * bspline_b(t[1]) * bspline_b(t[2]))


@dataclass
class SparseSystem:
    """Interpolation system A alpha = c, rows indexed by grid vertex.

    ``matrix`` materializes the stored CSR form (x-fastest flattening) on
    first use; ``matvec_free`` applies the same operator from the 27-point
    stencil without ever storing it.
    """

    spec: GridSpec
    rhs: np.ndarray  # flattened x-fastest
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.spec.vertex_count

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            m = self.spec.verts_per_axis
            t1d = sp.diags(
                [np.full(m - 1, B1), np.full(m, B0), np.full(m - 1, B1)], [-1, 0, 1]
            )
            # x-fastest flattening: operator = Tz (x) Ty (x) Tx.
            self._matrix = sp.kron(t1d, sp.kron(t1d, t1d, format="csr"), format="csr")
        return self._matrix

    def matvec_free(self, x_flat: np.ndarray) -> np.ndarray:
        x = unflatten(self.spec, x_flat)
        return flatten(_stencil_apply(x))

    def matvec_stored(self, x_flat: np.ndarray) -> np.ndarray:
        return self.matrix @ x_flat


def flatten(lattice: np.ndarray) -> np.ndarray:
    """Lattice (i,j,k) -> flat vector with the x index varying fastest."""
    return lattice.ravel(order="F")


def unflatten(spec: GridSpec, flat: np.ndarray) -> np.ndarray:
    m = spec.verts_per_axis
    return flat.reshape((m, m, m), order="F")


def _stencil_apply(x: np.ndarray) -> np.ndarray:
    """Apply the separable [1/6, 2/3, 1/6] interpolation stencil along each axis."""
    y = x
    for axis in range(3):
        y = _axis_stencil(y, axis)
    return y


def _axis_stencil(x: np.ndarray, axis: int) -> np.ndarray:
    y = B0 * x
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    y[tuple(lo)] += B1 * x[tuple(hi)]
    y[tuple(hi)] += B1 * x[tuple(lo)]
    return y


def assemble_system(spec: GridSpec, grid: SdfGrid) -> SparseSystem:
    """Build the interpolation system with its right-hand side."""
    if grid.spec != spec:
        raise ValueError("grid spec does not match")
    return SparseSystem(spec=spec, rhs=flatten(grid.values.astype(np.float64)))


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float  # relative, ||A a - c|| / ||c||


def solve_coefficients(
    system: SparseSystem,
    tol: float = 1e-8,
    max_iter: int | None = None,
    matrix_free: bool = True,
) -> tuple[np.ndarray, SolveReport]:
    """Conjugate-gradient solve from a zero start; deterministic.

    Returns the coefficient lattice (same shape as the value lattice) and a
    report carrying the achieved relative residual. Non-convergence is not an
    exception: the caller decides whether the partial solve is usable.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * system.spec.verts_per_axis
    matvec = system.matvec_free if matrix_free else system.matvec_stored

    c = system.rhs
    cnorm = float(np.linalg.norm(c))
    if cnorm == 0.0:
        zero = np.zeros_like(c)
        return unflatten(system.spec, zero), SolveReport(True, 0, 0.0)

    x = np.zeros_like(c)
    r = c.copy()  # r = c - A*0
    p = r.copy()
    rs = float(r @ r)
    it = 0
    while it < max_iter:
        if np.sqrt(rs) / cnorm <= tol:
            break
        ap = matvec(p)
        alpha = rs / float(p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    residual = float(np.linalg.norm(matvec(x) - c)) / cnorm
    return unflatten(system.spec, x), SolveReport(residual <= tol, it, residual)


@dataclass(frozen=True)
class FieldSample:
    """Value, gradient and (exactly symmetric) Hessian of the field at one point."""

    value: float
    gradient: np.ndarray  # (3,)
    hessian: np.ndarray  # (3, 3)
    outside: bool = False


def _axis_weights(u: np.ndarray, n: int):
    """Per-axis stencil indices, validity-masked basis weights and derivatives.

    ``u`` is the grid-continuous coordinate q/w, any real value. Bases missing
    from the truncated lattice get weight zero, which makes the out-of-domain
    evaluation the exact truncated sum.
    """
    base = np.floor(u).astype(np.int64)
    idx = base[:, None] + _STENCIL[None, :]
    t = u[:, None] - idx
    valid = (idx >= 0) & (idx <= n)
    w0 = bspline_b(t) * valid
    w1 = bspline_b_d1(t) * valid
    w2 = bspline_b_d2(t) * valid
    return np.clip(idx, 0, n), w0, w1, w2


class SplineField:
    """Fitted coefficient lattice with analytic evaluation; immutable after solve."""

    def __init__(self, spec: GridSpec, coefficients: np.ndarray):
        m = spec.verts_per_axis
        if coefficients.shape != (m, m, m):
            raise ValueError("coefficient lattice does not match grid spec")
        self.spec = spec
        self.coefficients = np.ascontiguousarray(coefficients, dtype=np.float64)
        self.coefficients.setflags(write=False)

    # -- evaluation ------------------------------------------------------

    def _gather(self, points: np.ndarray):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = self.spec.n
        u = pts / self.spec.w
        ix, wx, dx, ddx = _axis_weights(u[:, 0], n)
        iy, wy, dy, ddy = _axis_weights(u[:, 1], n)
        iz, wz, dz, ddz = _axis_weights(u[:, 2], n)
        cube = self.coefficients[
            ix[:, :, None, None], iy[:, None, :, None], iz[:, None, None, :]
        ]
        outside = np.any((pts < 0.0) | (pts > 1.0), axis=1)
        return cube, (wx, wy, wz), (dx, dy, dz), (ddx, ddy, ddz), outside

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Field values at an (N, 3) batch of points."""
        cube, (wx, wy, wz), _, _, _ = self._gather(points)
        return np.einsum("ni,nj,nk,nijk->n", wx, wy, wz, cube)

    def eval(self, q) -> float:
        return float(self.eval_many(np.asarray(q, dtype=np.float64)[None, :])[0])

    def eval_full_many(self, points: np.ndarray):
        """Values, gradients, Hessians and outside flags for an (N, 3) batch.

        The value is produced by the identical contraction as ``eval_many`` so
        the two agree bitwise.
        """
        cube, (wx, wy, wz), (dx, dy, dz), (ddx, ddy, ddz), outside = self._gather(points)
        w = self.spec.w
        val = np.einsum("ni,nj,nk,nijk->n", wx, wy, wz, cube)
        gx = np.einsum("ni,nj,nk,nijk->n", dx, wy, wz, cube) / w
        gy = np.einsum("ni,nj,nk,nijk->n", wx, dy, wz, cube) / w
        gz = np.einsum("ni,nj,nk,nijk->n", wx, wy, dz, cube) / w
        w2 = w * w
        hxx = np.einsum("ni,nj,nk,nijk->n", ddx, wy, wz, cube) / w2
        hyy = np.einsum("ni,nj,nk,nijk->n", wx, ddy, wz, cube) / w2
        hzz = np.einsum("ni,nj,nk,nijk->n", wx, wy, ddz, cube) / w2
        hxy = np.einsum("ni,nj,nk,nijk->n", dx, dy, wz, cube) / w2
        hxz = np.einsum("ni,nj,nk,nijk->n", dx, wy, dz, cube) / w2
        hyz = np.einsum("ni,nj,nk,nijk->n", wx, dy, dz, cube) / w2
        grad = np.stack([gx, gy, gz], axis=1)
        hess = np.empty((len(val), 3, 3), dtype=np.float64)
        hess[:, 0, 0] = hxx
        hess[:, 1, 1] = hyy
        hess[:, 2, 2] = hzz
        hess[:, 0, 1] = hess[:, 1, 0] = hxy
        hess[:, 0, 2] = hess[:, 2, 0] = hxz
        hess[:, 1, 2] = hess[:, 2, 1] = hyz
        return val, grad, hess, outside

    def eval_full(self, q) -> FieldSample:
        val, grad, hess, outside = self.eval_full_many(np.asarray(q, dtype=np.float64)[None, :])
        return FieldSample(float(val[0]), grad[0], hess[0], bool(outside[0]))

    def gradient_many(self, points: np.ndarray) -> np.ndarray:
        cube, (wx, wy, wz), (dx, dy, dz), _, _ = self._gather(points)
        w = self.spec.w
        gx = np.einsum("ni,nj,nk,nijk->n", dx, wy, wz, cube) / w
        gy = np.einsum("ni,nj,nk,nijk->n", wx, dy, wz, cube) / w
        gz = np.einsum("ni,nj,nk,nijk->n", wx, wy, dz, cube) / w
        return np.stack([gx, gy, gz], axis=1)

    def domain_aabb(self) -> tuple[np.ndarray, np.ndarray]:
        """Box where the fit is constrained by data.

        Beyond it the truncated basis sum decays to zero no matter what the
        shape is, so marching or meshing out there reads phantom level sets.
        """
        return np.zeros(3), np.ones(3)


def fit_field(
    grid: SdfGrid,
    tol: float = 1e-8,
    max_iter: int | None = None,
    matrix_free: bool = True,
) -> tuple[SplineField, SolveReport]:
    """Interpolate the sampled grid: assemble and CG-solve in one step."""
    system = assemble_system(grid.spec, grid)
    coeffs, report = solve_coefficients(system, tol=tol, max_iter=max_iter, matrix_free=matrix_free)
    return SplineField(grid.spec, coeffs), report
