# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pure-numpy kernels; same signatures, same
semantics, picked at import when built."""
import numpy as np

cimport cython
from libc.math cimport exp, floor, fabs, cos, sin

IMPL = "native"

cdef double INF = float("inf")


def raycast_segments(double ox, double oy, cos_a, sin_a, segments):
    cdef const double[::1] ca = np.ascontiguousarray(cos_a, dtype=np.float64)
    cdef const double[::1] sa = np.ascontiguousarray(sin_a, dtype=np.float64)
    cdef const double[:, ::1] seg = np.ascontiguousarray(segments, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = ca.shape[0]
    cdef Py_ssize_t m = seg.shape[0]
    out_arr = np.full(n, INF)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double ex, ey, apx, apy, t_num, denom, t, u, best

    for i in range(n):
        best = INF
        for j in range(m):
            ex = seg[j, 2] - seg[j, 0]
            ey = seg[j, 3] - seg[j, 1]
            apx = seg[j, 0] - ox
            apy = seg[j, 1] - oy
            denom = ca[i] * ey - sa[i] * ex
            if denom == 0.0:
                continue
            t = (apx * ey - apy * ex) / denom
            u = (sa[i] * apx - ca[i] * apy) / denom
            if t >= 0.0 and 0.0 <= u <= 1.0 and t < best:
                best = t
        out[i] = best
    return out_arr


cdef inline double _sigmoid(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


def bilinear_probe(logodds, double res, double ox, double oy, xs, ys):
    cdef const double[:, ::1] grid = np.ascontiguousarray(logodds, dtype=np.float64)
    cdef const double[::1] px = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] py = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t h = grid.shape[0]
    cdef Py_ssize_t w = grid.shape[1]
    cdef Py_ssize_t n = px.shape[0]

    vals_arr = np.zeros(n)
    gx_arr = np.zeros(n)
    gy_arr = np.zeros(n)
    inside_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] vals = vals_arr
    cdef double[::1] gxs = gx_arr
    cdef double[::1] gys = gy_arr
    cdef unsigned char[::1] inside = inside_arr

    cdef Py_ssize_t i, ix, iy
    cdef double gx, gy, tx, ty, p00, p10, p01, p11

    for i in range(n):
        gx = (px[i] - ox) / res - 0.5
        gy = (py[i] - oy) / res - 0.5
        ix = <Py_ssize_t>floor(gx)
        iy = <Py_ssize_t>floor(gy)
        if ix < 0 or ix + 1 > w - 1 or iy < 0 or iy + 1 > h - 1:
            continue
        tx = gx - ix
        ty = gy - iy
        p00 = _sigmoid(grid[iy, ix])
        p10 = _sigmoid(grid[iy, ix + 1])
        p01 = _sigmoid(grid[iy + 1, ix])
        p11 = _sigmoid(grid[iy + 1, ix + 1])
        vals[i] = (1.0 - ty) * ((1.0 - tx) * p00 + tx * p10) \
            + ty * ((1.0 - tx) * p01 + tx * p11)
        gxs[i] = ((1.0 - ty) * (p10 - p00) + ty * (p11 - p01)) / res
        gys[i] = ((1.0 - tx) * (p01 - p00) + tx * (p11 - p10)) / res
        inside[i] = 1
    return vals_arr, gx_arr, gy_arr, inside_arr.astype(bool)


def match_accumulate(logodds, double res, double ox, double oy,
                     end_x, end_y, double px, double py, double ptheta):
    cdef const double[:, ::1] grid = np.ascontiguousarray(logodds, dtype=np.float64)
    cdef const double[::1] ex = np.ascontiguousarray(end_x, dtype=np.float64)
    cdef const double[::1] ey = np.ascontiguousarray(end_y, dtype=np.float64)
    cdef Py_ssize_t h = grid.shape[0]
    cdef Py_ssize_t w = grid.shape[1]
    cdef Py_ssize_t n = ex.shape[0]

    hess_arr = np.zeros((3, 3))
    b_arr = np.zeros(3)
    cdef double[:, ::1] hess = hess_arr
    cdef double[::1] b = b_arr
    cdef double sse = 0.0
    cdef Py_ssize_t used = 0

    cdef double c = cos(ptheta)
    cdef double s = sin(ptheta)
    cdef Py_ssize_t i, ix, iy
    cdef double wx, wy, gx, gy, tx, ty, p00, p10, p01, p11
    cdef double val, dx, dy, dth, r, j0, j1, j2

    for i in range(n):
        wx = px + c * ex[i] - s * ey[i]
        wy = py + s * ex[i] + c * ey[i]
        gx = (wx - ox) / res - 0.5
        gy = (wy - oy) / res - 0.5
        ix = <Py_ssize_t>floor(gx)
        iy = <Py_ssize_t>floor(gy)
        if ix < 0 or ix + 1 > w - 1 or iy < 0 or iy + 1 > h - 1:
            continue
        tx = gx - ix
        ty = gy - iy
        p00 = _sigmoid(grid[iy, ix])
        p10 = _sigmoid(grid[iy, ix + 1])
        p01 = _sigmoid(grid[iy + 1, ix])
        p11 = _sigmoid(grid[iy + 1, ix + 1])
        val = (1.0 - ty) * ((1.0 - tx) * p00 + tx * p10) \
            + ty * ((1.0 - tx) * p01 + tx * p11)
        dx = ((1.0 - ty) * (p10 - p00) + ty * (p11 - p01)) / res
        dy = ((1.0 - tx) * (p01 - p00) + tx * (p11 - p10)) / res
        dth = dx * (-s * ex[i] - c * ey[i]) + dy * (c * ex[i] - s * ey[i])
        r = 1.0 - val
        j0 = dx
        j1 = dy
        j2 = dth
        hess[0, 0] += j0 * j0
        hess[0, 1] += j0 * j1
        hess[0, 2] += j0 * j2
        hess[1, 1] += j1 * j1
        hess[1, 2] += j1 * j2
        hess[2, 2] += j2 * j2
        b[0] += j0 * r
        b[1] += j1 * r
        b[2] += j2 * r
        sse += r * r
        used += 1

    hess[1, 0] = hess[0, 1]
    hess[2, 0] = hess[0, 2]
    hess[2, 1] = hess[1, 2]
    return hess_arr, b_arr, sse, used


def ray_updates(logodds, double res, double ox, double oy,
                double x0, double y0, hit_x, hit_y,
                double l_free, double l_occ, double lo, double hi):
    cdef double[:, ::1] cells = logodds
    cdef const double[::1] hx = np.ascontiguousarray(hit_x, dtype=np.float64)
    cdef const double[::1] hy = np.ascontiguousarray(hit_y, dtype=np.float64)
    cdef Py_ssize_t h = cells.shape[0]
    cdef Py_ssize_t w = cells.shape[1]
    cdef Py_ssize_t ix0 = <Py_ssize_t>floor((x0 - ox) / res)
    cdef Py_ssize_t iy0 = <Py_ssize_t>floor((y0 - oy) / res)
    cdef Py_ssize_t n = hx.shape[0]
    cdef Py_ssize_t i, updates = 0

    for i in range(n):
        updates += _bresenham(
            cells, w, h, ix0, iy0,
            <Py_ssize_t>floor((hx[i] - ox) / res),
            <Py_ssize_t>floor((hy[i] - oy) / res),
            l_free, l_occ, lo, hi,
        )
    return updates


cdef Py_ssize_t _bresenham(double[:, ::1] cells, Py_ssize_t w, Py_ssize_t h,
                           Py_ssize_t x0, Py_ssize_t y0,
                           Py_ssize_t x1, Py_ssize_t y1,
                           double l_free, double l_occ,
                           double lo, double hi) nogil:
    cdef Py_ssize_t dx = x1 - x0
    if dx < 0:
        dx = -dx
    cdef Py_ssize_t sx = 1 if x0 < x1 else -1
    cdef Py_ssize_t dy = y1 - y0
    if dy < 0:
        dy = -dy
    dy = -dy
    cdef Py_ssize_t sy = 1 if y0 < y1 else -1
    cdef Py_ssize_t err = dx + dy
    cdef Py_ssize_t e2, n = 0
    cdef double v

    while True:
        if x0 < 0 or x0 >= w or y0 < 0 or y0 >= h:
            return n
        if x0 == x1 and y0 == y1:
            v = cells[y0, x0] + l_occ
            cells[y0, x0] = hi if v > hi else (lo if v < lo else v)
            return n + 1
        v = cells[y0, x0] + l_free
        cells[y0, x0] = hi if v > hi else (lo if v < lo else v)
        n += 1
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
