# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: bilinear height sampling and rock stamping."""
from libc.math cimport cos, fabs, floor, nearbyint, sqrt, M_PI

# offsets within this many cells of a node are read as the node itself, so
# node-aligned queries on non-dyadic resolutions return stored heights exactly
cdef double NODE_SNAP = 1e-9


def bilinear_sample(const float[:, ::1] heights, double origin_x, double origin_y,
                    double resolution, const double[::1] xs, const double[::1] ys,
                    double fill, double[::1] out, unsigned char[::1] oob):
    cdef Py_ssize_t rows = heights.shape[0]
    cdef Py_ssize_t cols = heights.shape[1]
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t k, i0, j0
    cdef double fx, fy, tx, ty, top, bottom
    cdef double max_fx = <double>(cols - 1)
    cdef double max_fy = <double>(rows - 1)
    cdef Py_ssize_t count = 0
    for k in range(n):
        fx = (xs[k] - origin_x) / resolution
        fy = (ys[k] - origin_y) / resolution
        if fabs(fx - nearbyint(fx)) < NODE_SNAP:
            fx = nearbyint(fx)
        if fabs(fy - nearbyint(fy)) < NODE_SNAP:
            fy = nearbyint(fy)
        if not (fx >= 0.0 and fx <= max_fx and fy >= 0.0 and fy <= max_fy):
            out[k] = fill
            oob[k] = 1
            count += 1
            continue
        i0 = <Py_ssize_t>floor(fx)
        j0 = <Py_ssize_t>floor(fy)
        if i0 > cols - 2:
            i0 = cols - 2
        if j0 > rows - 2:
            j0 = rows - 2
        tx = fx - i0
        ty = fy - j0
        bottom = (1.0 - tx) * heights[j0, i0] + tx * heights[j0, i0 + 1]
        top = (1.0 - tx) * heights[j0 + 1, i0] + tx * heights[j0 + 1, i0 + 1]
        out[k] = (1.0 - ty) * bottom + ty * top
        oob[k] = 0
    return count


def stamp_rocks(double[:, ::1] heights, const double[::1] cx, const double[::1] cy,
                const double[::1] radii, const double[::1] peaks,
                double origin_x, double origin_y, double resolution):
    cdef Py_ssize_t rows = heights.shape[0]
    cdef Py_ssize_t cols = heights.shape[1]
    cdef Py_ssize_t r, i, j, i_lo, i_hi, j_lo, j_hi
    cdef double dx, dy, d, h, radius
    for r in range(cx.shape[0]):
        radius = radii[r]
        i_lo = <Py_ssize_t>floor((cx[r] - radius - origin_x) / resolution)
        i_hi = <Py_ssize_t>floor((cx[r] + radius - origin_x) / resolution) + 1
        j_lo = <Py_ssize_t>floor((cy[r] - radius - origin_y) / resolution)
        j_hi = <Py_ssize_t>floor((cy[r] + radius - origin_y) / resolution) + 1
        if i_lo < 0:
            i_lo = 0
        if j_lo < 0:
            j_lo = 0
        if i_hi > cols - 1:
            i_hi = cols - 1
        if j_hi > rows - 1:
            j_hi = rows - 1
        for j in range(j_lo, j_hi + 1):
            dy = origin_y + j * resolution - cy[r]
            for i in range(i_lo, i_hi + 1):
                dx = origin_x + i * resolution - cx[r]
                d = sqrt(dx * dx + dy * dy)
                if d < radius:
                    h = 0.5 * peaks[r] * (1.0 + cos(M_PI * d / radius))
                    if h > heights[j, i]:
                        heights[j, i] = h
