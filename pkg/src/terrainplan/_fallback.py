"""Pure-numpy versions of the compiled kernels, with identical signatures."""
import numpy as np

NODE_SNAP = 1e-9


def _snap(f):
    r = np.rint(f)
    return np.where(np.abs(f - r) < NODE_SNAP, r, f)


def bilinear_sample(heights, origin_x, origin_y, resolution, xs, ys, fill, out, oob):
    rows, cols = heights.shape
    fx = _snap((xs - origin_x) / resolution)
    fy = _snap((ys - origin_y) / resolution)
    inside = (fx >= 0.0) & (fx <= cols - 1) & (fy >= 0.0) & (fy <= rows - 1)
    fxi = np.where(inside, fx, 0.0)
    fyi = np.where(inside, fy, 0.0)
    i0 = np.minimum(np.floor(fxi).astype(np.intp), cols - 2)
    j0 = np.minimum(np.floor(fyi).astype(np.intp), rows - 2)
    tx = fxi - i0
    ty = fyi - j0
    h = heights.astype(np.float64, copy=False)
    bottom = (1.0 - tx) * h[j0, i0] + tx * h[j0, i0 + 1]
    top = (1.0 - tx) * h[j0 + 1, i0] + tx * h[j0 + 1, i0 + 1]
    out[:] = np.where(inside, (1.0 - ty) * bottom + ty * top, fill)
    oob[:] = ~inside
    return int(np.count_nonzero(~inside))


def stamp_rocks(heights, cx, cy, radii, peaks, origin_x, origin_y, resolution):
    rows, cols = heights.shape
    for x0, y0, radius, peak in zip(cx, cy, radii, peaks):
        i_lo = max(int(np.floor((x0 - radius - origin_x) / resolution)), 0)
        i_hi = min(int(np.floor((x0 + radius - origin_x) / resolution)) + 1, cols - 1)
        j_lo = max(int(np.floor((y0 - radius - origin_y) / resolution)), 0)
        j_hi = min(int(np.floor((y0 + radius - origin_y) / resolution)) + 1, rows - 1)
        if i_lo > i_hi or j_lo > j_hi:
            continue
        dx = origin_x + np.arange(i_lo, i_hi + 1) * resolution - x0
        dy = origin_y + np.arange(j_lo, j_hi + 1) * resolution - y0
        d = np.sqrt(dx[None, :] * dx[None, :] + dy[:, None] * dy[:, None])
        bump = np.where(d < radius, 0.5 * peak * (1.0 + np.cos(np.pi * d / radius)), 0.0)
        window = heights[j_lo:j_hi + 1, i_lo:i_hi + 1]
        np.maximum(window, bump, out=window)
