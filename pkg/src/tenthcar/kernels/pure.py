"""Pure numpy implementations of the hot kernels.

Same call signatures and semantics as the compiled extension in
``_native.pyx``; selected at import time when the extension is missing or
``TENTHCAR_PURE_KERNELS=1`` is set.
"""
from __future__ import annotations

import math

import numpy as np

IMPL = "pure"


def raycast_segments(ox, oy, cos_a, sin_a, segments):
    """Distance from (ox, oy) along each ray direction to the nearest
    segment intersection; +inf where a ray hits nothing.

    segments: float64 array (M, 4) of (x1, y1, x2, y2) endpoints.
    """
    cos_a = np.asarray(cos_a, dtype=np.float64)
    sin_a = np.asarray(sin_a, dtype=np.float64)
    segments = np.asarray(segments, dtype=np.float64)
    n = cos_a.shape[0]
    if segments.size == 0:
        return np.full(n, np.inf)

    ex = segments[:, 2] - segments[:, 0]
    ey = segments[:, 3] - segments[:, 1]
    apx = segments[:, 0] - ox
    apy = segments[:, 1] - oy
    # Ray p + t*d meets segment a + u*e at t = cross(ap, e)/denom,
    # u = cross(d, ap)/denom with denom = cross(d, e).
    t_num = apx * ey - apy * ex  # (M,) independent of ray direction
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = cos_a[:, None] * ey[None, :] - sin_a[:, None] * ex[None, :]
        t = t_num[None, :] / denom
        u = (sin_a[:, None] * apx[None, :] - cos_a[:, None] * apy[None, :]) / denom
        valid = (denom != 0.0) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
        t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def bilinear_probe(logodds, res, ox, oy, xs, ys):
    """Bilinear interpolation of occupancy probability and its spatial
    gradient at world points (xs, ys).

    Cell (0, 0) has center (ox + res/2, oy + res/2); probability is the
    logistic of the stored log-odds. Returns (values, grad_x, grad_y,
    inside) where `inside` marks points with all 4 corner cells in-grid;
    outputs are 0 outside.
    """
    logodds = np.asarray(logodds, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    h, w = logodds.shape

    gx = (xs - ox) / res - 0.5
    gy = (ys - oy) / res - 0.5
    ix = np.floor(gx).astype(np.int64)
    iy = np.floor(gy).astype(np.int64)
    inside = (ix >= 0) & (ix + 1 <= w - 1) & (iy >= 0) & (iy + 1 <= h - 1)

    ixc = np.clip(ix, 0, w - 2)
    iyc = np.clip(iy, 0, h - 2)
    tx = gx - ix
    ty = gy - iy

    p00 = _sigmoid(logodds[iyc, ixc])
    p10 = _sigmoid(logodds[iyc, ixc + 1])
    p01 = _sigmoid(logodds[iyc + 1, ixc])
    p11 = _sigmoid(logodds[iyc + 1, ixc + 1])

    vals = (1.0 - ty) * ((1.0 - tx) * p00 + tx * p10) + ty * ((1.0 - tx) * p01 + tx * p11)
    grad_x = ((1.0 - ty) * (p10 - p00) + ty * (p11 - p01)) / res
    grad_y = ((1.0 - tx) * (p01 - p00) + tx * (p11 - p10)) / res

    zero = np.zeros_like(vals)
    return (
        np.where(inside, vals, zero),
        np.where(inside, grad_x, zero),
        np.where(inside, grad_y, zero),
        inside,
    )


def match_accumulate(logodds, res, ox, oy, end_x, end_y, px, py, ptheta):
    """One Gauss-Newton accumulation pass for scan-to-map alignment.

    Beam endpoints (end_x, end_y) are in the scanner frame; they are
    transformed by pose (px, py, ptheta), probed with bilinear_probe, and
    accumulated into the 3x3 normal matrix H, the right-hand side b and
    the squared residual sum. Points outside the grid interior are
    skipped. Returns (H, b, sse, n_used).
    """
    end_x = np.asarray(end_x, dtype=np.float64)
    end_y = np.asarray(end_y, dtype=np.float64)
    c = math.cos(ptheta)
    s = math.sin(ptheta)
    wx = px + c * end_x - s * end_y
    wy = py + s * end_x + c * end_y

    vals, gx, gy, inside = bilinear_probe(logodds, res, ox, oy, wx, wy)
    if not inside.any():
        return np.zeros((3, 3)), np.zeros(3), 0.0, 0

    vals = vals[inside]
    gx = gx[inside]
    gy = gy[inside]
    dwx_dth = -s * end_x[inside] - c * end_y[inside]
    dwy_dth = c * end_x[inside] - s * end_y[inside]

    r = 1.0 - vals
    jth = gx * dwx_dth + gy * dwy_dth
    jac = np.stack([gx, gy, jth], axis=1)
    hess = jac.T @ jac
    b = jac.T @ r
    return hess, b, float(r @ r), int(inside.sum())


def ray_updates(logodds, res, ox, oy, x0, y0, hit_x, hit_y, l_free, l_occ, lo, hi):
    """Integrate one scan's finite beams into a log-odds grid.

    Cells on the Bresenham line from the beam origin to each endpoint get
    l_free added; the endpoint cell gets l_occ; values clamp to [lo, hi].
    Beams are clipped at the grid boundary (a clipped beam marks no
    endpoint). Returns the number of cell updates applied.
    """
    logodds = np.asarray(logodds)
    h, w = logodds.shape
    ix0 = int(math.floor((x0 - ox) / res))
    iy0 = int(math.floor((y0 - oy) / res))
    hit_x = np.asarray(hit_x, dtype=np.float64)
    hit_y = np.asarray(hit_y, dtype=np.float64)
    updates = 0
    for bx, by in zip(hit_x, hit_y):
        ix1 = int(math.floor((bx - ox) / res))
        iy1 = int(math.floor((by - oy) / res))
        updates += _bresenham_update(
            logodds, w, h, ix0, iy0, ix1, iy1, l_free, l_occ, lo, hi
        )
    return updates


def _bresenham_update(cells, w, h, x0, y0, x1, y1, l_free, l_occ, lo, hi):
    dx = abs(x1 - x0)
    sx = 1 if x0 < x1 else -1
    dy = -abs(y1 - y0)
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    n = 0
    while True:
        if not (0 <= x0 < w and 0 <= y0 < h):
            return n  # left the grid: clip, no endpoint mark
        if x0 == x1 and y0 == y1:
            cells[y0, x0] = min(hi, max(lo, cells[y0, x0] + l_occ))
            return n + 1
        cells[y0, x0] = min(hi, max(lo, cells[y0, x0] + l_free))
        n += 1
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))
