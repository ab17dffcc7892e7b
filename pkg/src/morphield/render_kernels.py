"""Hot loops for rendering and volume sampling, compiled with numba.

The scalar spline/deformer evaluation here mirrors the numpy implementations
in spline.py and deformer.py. The numpy paths are the behavioral reference;
these kernels exist because tracing a frame costs millions of field
evaluations and must stay inside an interactive budget on CPU.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _b(t):
    a = abs(t)
    if a < 1.0:
        return 0.5 * a * a * a - a * a + 2.0 / 3.0
    if a < 2.0:
        e = 2.0 - a
        return e * e * e / 6.0
    return 0.0


@njit(cache=True, inline="always")
def _b_d1(t):
    a = abs(t)
    if a < 1.0:
        m = 1.5 * a * a - 2.0 * a
    elif a < 2.0:
        e = 2.0 - a
        m = -0.5 * e * e
    else:
        return 0.0
    return m if t >= 0.0 else -m


@njit(cache=True, inline="always")
def _axis_setup(u, n, idx, wv, wd):
    base = int(np.floor(u))
    for o in range(4):
        i = base - 1 + o
        t = u - i
        if 0 <= i <= n:
            idx[o] = i
            wv[o] = _b(t)
            wd[o] = _b_d1(t)
        else:
            idx[o] = 0
            wv[o] = 0.0
            wd[o] = 0.0


@njit(cache=True)
def _field_value(coeffs, n, w, x, y, z):
    ix = np.empty(4, dtype=np.int64)
    iy = np.empty(4, dtype=np.int64)
    iz = np.empty(4, dtype=np.int64)
    wx = np.empty(4, dtype=np.float64)
    wy = np.empty(4, dtype=np.float64)
    wz = np.empty(4, dtype=np.float64)
    dummy = np.empty(4, dtype=np.float64)
    _axis_setup(x / w, n, ix, wx, dummy)
    _axis_setup(y / w, n, iy, wy, dummy)
    _axis_setup(z / w, n, iz, wz, dummy)
    acc = 0.0
    for a in range(4):
        if wx[a] == 0.0:
            continue
        for b in range(4):
            if wy[b] == 0.0:
                continue
            wxy = wx[a] * wy[b]
            for c in range(4):
                acc += wxy * wz[c] * coeffs[ix[a], iy[b], iz[c]]
    return acc


@njit(cache=True)
def _field_value_grad(coeffs, n, w, x, y, z, grad):
    ix = np.empty(4, dtype=np.int64)
    iy = np.empty(4, dtype=np.int64)
    iz = np.empty(4, dtype=np.int64)
    wx = np.empty(4, dtype=np.float64)
    wy = np.empty(4, dtype=np.float64)
    wz = np.empty(4, dtype=np.float64)
    dx = np.empty(4, dtype=np.float64)
    dy = np.empty(4, dtype=np.float64)
    dz = np.empty(4, dtype=np.float64)
    _axis_setup(x / w, n, ix, wx, dx)
    _axis_setup(y / w, n, iy, wy, dy)
    _axis_setup(z / w, n, iz, wz, dz)
    val = 0.0
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for a in range(4):
        for b in range(4):
            for c in range(4):
                co = coeffs[ix[a], iy[b], iz[c]]
                val += wx[a] * wy[b] * wz[c] * co
                gx += dx[a] * wy[b] * wz[c] * co
                gy += wx[a] * dy[b] * wz[c] * co
                gz += wx[a] * wy[b] * dz[c] * co
    grad[0] = gx / w
    grad[1] = gy / w
    grad[2] = gz / w
    return val


@njit(cache=True, inline="always")
def _deformer_value(anchor, frame, weights, beta, x, y, z):
    rx = x - anchor[0]
    ry = y - anchor[1]
    rz = z - anchor[2]
    t0 = (rx * frame[0, 0] + ry * frame[1, 0] + rz * frame[2, 0]) / weights[0]
    if abs(t0) >= 2.0:
        return 0.0
    t1 = (rx * frame[0, 1] + ry * frame[1, 1] + rz * frame[2, 1]) / weights[1]
    if abs(t1) >= 2.0:
        return 0.0
    t2 = (rx * frame[0, 2] + ry * frame[1, 2] + rz * frame[2, 2]) / weights[2]
    if abs(t2) >= 2.0:
        return 0.0
    return beta * _b(t0) * _b(t1) * _b(t2)


@njit(cache=True, inline="always")
def _deformer_value_grad(anchor, frame, weights, beta, x, y, z, grad):
    rx = x - anchor[0]
    ry = y - anchor[1]
    rz = z - anchor[2]
    t0 = (rx * frame[0, 0] + ry * frame[1, 0] + rz * frame[2, 0]) / weights[0]
    t1 = (rx * frame[0, 1] + ry * frame[1, 1] + rz * frame[2, 1]) / weights[1]
    t2 = (rx * frame[0, 2] + ry * frame[1, 2] + rz * frame[2, 2]) / weights[2]
    if abs(t0) >= 2.0 or abs(t1) >= 2.0 or abs(t2) >= 2.0:
        return 0.0
    b0 = _b(t0)
    b1 = _b(t1)
    b2 = _b(t2)
    g0 = beta * _b_d1(t0) * b1 * b2 / weights[0]
    g1 = beta * b0 * _b_d1(t1) * b2 / weights[1]
    g2 = beta * b0 * b1 * _b_d1(t2) / weights[2]
    grad[0] += frame[0, 0] * g0 + frame[0, 1] * g1 + frame[0, 2] * g2
    grad[1] += frame[1, 0] * g0 + frame[1, 1] * g1 + frame[1, 2] * g2
    grad[2] += frame[2, 0] * g0 + frame[2, 1] * g1 + frame[2, 2] * g2
    return beta * b0 * b1 * b2


@njit(cache=True, inline="always")
def _composite_value(coeffs, n, w, anchors, frames, dweights, betas, x, y, z):
    val = _field_value(coeffs, n, w, x, y, z)
    for d in range(anchors.shape[0]):
        val += _deformer_value(anchors[d], frames[d], dweights[d], betas[d], x, y, z)
    return val


@njit(cache=True, inline="always")
def _ray_box(ox, oy, oz, dx, dy, dz, lo, hi):
    """Slab intersection; returns (tmin, tmax), empty when tmin > tmax."""
    tmin = -1e30
    tmax = 1e30
    for k in range(3):
        o = ox if k == 0 else (oy if k == 1 else oz)
        d = dx if k == 0 else (dy if k == 1 else dz)
        if abs(d) < 1e-30:
            if o < lo[k] or o > hi[k]:
                return 1.0, -1.0
        else:
            t0 = (lo[k] - o) / d
            t1 = (hi[k] - o) / d
            if t0 > t1:
                t0, t1 = t1, t0
            if t0 > tmin:
                tmin = t0
            if t1 < tmax:
                tmax = t1
    return tmin, tmax


@njit(cache=True, parallel=True)
def trace_rays(
    origin,
    dirs,
    coeffs,
    n,
    w,
    anchors,
    frames,
    dweights,
    betas,
    def_lo,
    def_hi,
    box_lo,
    box_hi,
    max_steps,
    step_scale,
    hit_eps,
    max_distance,
    out_depth,
    out_rgba,
    out_steps,
):
    """Sphere-trace one ray per row of ``dirs``; Lambertian headlight shading."""
    ndef = anchors.shape[0]
    for i in prange(dirs.shape[0]):
        dx = dirs[i, 0]
        dy = dirs[i, 1]
        dz = dirs[i, 2]
        ox = origin[0]
        oy = origin[1]
        oz = origin[2]

        tmin, tmax = _ray_box(ox, oy, oz, dx, dy, dz, box_lo, box_hi)
        out_depth[i] = np.inf
        out_steps[i] = 0
        out_rgba[i, 0] = 0
        out_rgba[i, 1] = 0
        out_rgba[i, 2] = 0
        out_rgba[i, 3] = 0
        if tmax < tmin or tmax < 0.0:
            continue
        t = tmin if tmin > 0.0 else 0.0
        if t > max_distance:
            continue

        # per-ray deformer activity intervals
        dint = np.empty((ndef, 2), dtype=np.float64)
        for d in range(ndef):
            a, b = _ray_box(ox, oy, oz, dx, dy, dz, def_lo[d], def_hi[d])
            dint[d, 0] = a
            dint[d, 1] = b

        steps = 0
        hit = False
        while steps < max_steps and t <= tmax and t <= max_distance:
            px = ox + t * dx
            py = oy + t * dy
            pz = oz + t * dz
            f = _field_value(coeffs, n, w, px, py, pz)
            for d in range(ndef):
                if dint[d, 0] <= t <= dint[d, 1]:
                    f += _deformer_value(anchors[d], frames[d], dweights[d], betas[d], px, py, pz)
            steps += 1
            if f < hit_eps:
                hit = True
                break
            t += step_scale * f
        out_steps[i] = steps
        if not hit:
            continue

        px = ox + t * dx
        py = oy + t * dy
        pz = oz + t * dz
        grad = np.zeros(3, dtype=np.float64)
        _field_value_grad(coeffs, n, w, px, py, pz, grad)
        for d in range(ndef):
            _deformer_value_grad(anchors[d], frames[d], dweights[d], betas[d], px, py, pz, grad)
        gn = np.sqrt(grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2])
        if gn > 0.0:
            lam = -(grad[0] * dx + grad[1] * dy + grad[2] * dz) / gn
        else:
            lam = 0.0
        if lam < 0.0:
            lam = 0.0
        shade = 0.15 + 0.85 * lam
        c = np.uint8(min(255.0, shade * 255.0 + 0.5))
        out_depth[i] = t
        out_rgba[i, 0] = c
        out_rgba[i, 1] = c
        out_rgba[i, 2] = np.uint8(min(255.0, shade * 235.0 + 0.5))
        out_rgba[i, 3] = 255


@njit(cache=True, parallel=True)
def sample_volume(coeffs, n, w, anchors, frames, dweights, betas, res, out):
    """Composite field on a (res+1)^3 lattice over the unit cube."""
    h = 1.0 / res
    for i in prange(res + 1):
        x = i * h
        for j in range(res + 1):
            y = j * h
            for k in range(res + 1):
                out[i, j, k] = _composite_value(
                    coeffs, n, w, anchors, frames, dweights, betas, x, y, k * h
                )


@njit(cache=True, parallel=True)
def eval_points(coeffs, n, w, anchors, frames, dweights, betas, points, out):
    """Composite field at arbitrary points; used for bulk probing."""
    for i in prange(points.shape[0]):
        out[i] = _composite_value(
            coeffs, n, w, anchors, frames, dweights, betas,
            points[i, 0], points[i, 1], points[i, 2],
        )
