"""Kernel dispatch.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback is used. Setting ``TERRAINPLAN_PURE_PYTHON=1`` forces the
fallback.
"""
import os

import numpy as np

from . import _fallback

_compiled = None
if os.environ.get("TERRAINPLAN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available_backends():
    return sorted(_BACKENDS)


def _impl(backend):
    return _BACKENDS[backend or BACKEND]


def sample_bilinear(heights, origin_x, origin_y, resolution, xs, ys, fill=0.0, backend=None):
    """Bilinear heights at world points; returns ``(values, out_of_bounds_mask)``.

    ``xs`` and ``ys`` may have any (matching) shape.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    shape = np.broadcast_shapes(xs.shape, ys.shape)
    xf = np.ascontiguousarray(np.broadcast_to(xs, shape)).reshape(-1)
    yf = np.ascontiguousarray(np.broadcast_to(ys, shape)).reshape(-1)
    out = np.empty(xf.shape[0], dtype=np.float64)
    oob = np.empty(xf.shape[0], dtype=np.uint8)
    h = np.ascontiguousarray(heights, dtype=np.float32)
    _impl(backend).bilinear_sample(h, float(origin_x), float(origin_y), float(resolution),
                                   xf, yf, float(fill), out, oob)
    return out.reshape(shape), oob.reshape(shape).astype(bool)


def stamp_rocks(heights, cx, cy, radii, peaks, origin_x, origin_y, resolution, backend=None):
    """Max-compose cosine bumps into ``heights`` (float64, C-contiguous) in place."""
    if heights.dtype != np.float64 or not heights.flags.c_contiguous:
        raise TypeError("heights must be a C-contiguous float64 array")
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (cx, cy, radii, peaks)]
    _impl(backend).stamp_rocks(heights, *args, float(origin_x), float(origin_y), float(resolution))
