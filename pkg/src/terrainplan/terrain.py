"""Elevation maps: synthetic rock fields, height queries, patch extraction, EMAP files."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import HeaderError, MagicError, ParameterError, TruncatedError, VersionError, FormatError

PATCH_ROWS = 40
PATCH_COLS = 100
PATCH_RESOLUTION = 0.008
PATCH_CELLS = PATCH_ROWS * PATCH_COLS
EMAP_MAGIC = "EMAP v1"


def _fmt(x):
    return np.format_float_positional(float(x), unique=True, trim="-")


class ElevationMap:
    """Immutable 2D height grid.

    ``heights[r, c]`` is the terrain height at world
    ``(origin_x + c * resolution, origin_y + r * resolution)``; stored as
    float32 so that the EMAP round trip is exact.
    """

    __slots__ = ("cols", "rows", "resolution", "origin_x", "origin_y", "heights")

    def __init__(self, heights, resolution, origin_x=0.0, origin_y=0.0):
        h = np.array(heights, dtype=np.float32, copy=True)
        if h.ndim != 2:
            raise ParameterError("heights", "must be a 2D grid")
        rows, cols = h.shape
        if cols < 2 or rows < 2:
            raise ParameterError("cols/rows", "need at least 2x2 cells")
        if not resolution > 0:
            raise ParameterError("resolution", "must be positive")
        if not np.all(np.isfinite(h)):
            raise ParameterError("heights", "all heights must be finite")
        if np.any(h < 0):
            raise ParameterError("heights", "heights must be >= 0 (ground plane reference)")
        h.setflags(write=False)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "resolution", float(resolution))
        object.__setattr__(self, "origin_x", float(origin_x))
        object.__setattr__(self, "origin_y", float(origin_y))
        object.__setattr__(self, "heights", h)

    def __setattr__(self, name, value):
        raise AttributeError("ElevationMap is immutable")

    def __eq__(self, other):
        if not isinstance(other, ElevationMap):
            return NotImplemented
        return (
            (self.cols, self.rows, self.resolution, self.origin_x, self.origin_y)
            == (other.cols, other.rows, other.resolution, other.origin_x, other.origin_y)
            and self.heights.tobytes() == other.heights.tobytes()
        )

    def __hash__(self):
        return hash((self.cols, self.rows, self.resolution, self.heights.tobytes()))

    def __repr__(self):
        return (f"ElevationMap({self.cols}x{self.rows}, res={self.resolution}, "
                f"origin=({self.origin_x}, {self.origin_y}), max={float(self.heights.max()):.3f})")

    @property
    def extent(self):
        """(x_min, x_max, y_min, y_max) of the cell-center hull."""
        return (self.origin_x, self.origin_x + (self.cols - 1) * self.resolution,
                self.origin_y, self.origin_y + (self.rows - 1) * self.resolution)

    def sample(self, xs, ys, fill=0.0):
        """Vectorized bilinear lookup; returns ``(values, out_of_bounds_mask)``."""
        return kernels.sample_bilinear(self.heights, self.origin_x, self.origin_y,
                                       self.resolution, xs, ys, fill)


@dataclass(frozen=True)
class TerrainGenSpec:
    seed: int = 0
    width: float = 1.3
    length: float = 3.1
    resolution: float = 0.008
    max_height: float = 0.6
    rock_count: int = 60
    rock_radius_mean: float = 0.15
    rock_radius_std: float = 0.05
    # rock-free strips at both x ends, for start and goal placement
    clear_ends: float = 0.0

    def validate(self):
        for name in ("width", "length", "resolution", "max_height", "rock_radius_mean"):
            if not getattr(self, name) > 0:
                raise ParameterError(name, "must be positive")
        if self.rock_count < 0:
            raise ParameterError("rock_count", "must be >= 0")
        if self.rock_radius_std < 0:
            raise ParameterError("rock_radius_std", "must be >= 0")
        if self.clear_ends < 0 or 2 * self.clear_ends >= self.length:
            raise ParameterError("clear_ends", "must be >= 0 and leave room for rocks")
        return self


@dataclass
class ElevationPatch:
    cells: np.ndarray  # (PATCH_ROWS, PATCH_COLS)
    anchor_pose: tuple
    out_of_bounds_count: int = 0

    def __eq__(self, other):
        if not isinstance(other, ElevationPatch):
            return NotImplemented
        return (self.anchor_pose == other.anchor_pose
                and self.out_of_bounds_count == other.out_of_bounds_count
                and np.array_equal(self.cells, other.cells))


def grid_dims(length, width, resolution):
    """Cell-center counts covering [0, length] x [0, width] inclusive."""
    cols = int(math.floor(length / resolution + 1e-9)) + 1
    rows = int(math.floor(width / resolution + 1e-9)) + 1
    return cols, rows


def generate_rock_field(spec: TerrainGenSpec) -> ElevationMap:
    """Max-composition of cosine bumps over a flat zero floor, deterministic per seed.

    Rock supports stay two cells clear of the lateral map border and outside
    the ``clear_ends`` strips.
    """
    spec.validate()
    res = spec.resolution
    cols, rows = grid_dims(spec.length, spec.width, res)
    x_max = (cols - 1) * res
    y_max = (rows - 1) * res
    border = 2 * res
    rng = np.random.default_rng(spec.seed)
    n = spec.rock_count
    radii = np.maximum(rng.normal(spec.rock_radius_mean, spec.rock_radius_std, n),
                       0.25 * spec.rock_radius_mean)
    peaks = rng.uniform(0.35, 1.0, n) * spec.max_height
    ux = rng.uniform(0.0, 1.0, n)
    uy = rng.uniform(0.0, 1.0, n)
    # shrink any rock that cannot fit inside the allowed band
    x_lo = max(spec.clear_ends, border)
    x_band = x_max - 2 * x_lo
    radii = np.minimum(radii, 0.5 * np.minimum(x_band, y_max - 2 * border) * 0.999)
    cx = x_lo + radii + ux * np.maximum(x_band - 2 * radii, 0.0)
    cy = border + radii + uy * np.maximum(y_max - 2 * border - 2 * radii, 0.0)
    heights = np.zeros((rows, cols), dtype=np.float64)
    if n:
        kernels.stamp_rocks(heights, cx, cy, radii, peaks, 0.0, 0.0, res)
    h32 = heights.astype(np.float32)
    cap = np.float32(spec.max_height)
    if float(cap) > spec.max_height:
        cap = np.nextafter(cap, np.float32(0.0))
    np.minimum(h32, cap, out=h32)
    return ElevationMap(h32, res, 0.0, 0.0)


def elevation_at(emap: ElevationMap, x, y):
    """Bilinear height at (x, y), or ``None`` outside the cell-center hull."""
    value, oob = emap.sample(np.array([x], dtype=np.float64), np.array([y], dtype=np.float64))
    return None if oob[0] else float(value[0])


def patch_offsets(patch_cols=PATCH_COLS, patch_rows=PATCH_ROWS, patch_resolution=PATCH_RESOLUTION):
    """Body-frame (forward, left) offsets of the patch cells, shape (rows, cols).

    Columns run forward, rows run left; cell (rows//2, cols//2) sits on the anchor.
    """
    fwd = (np.arange(patch_cols) - patch_cols // 2) * patch_resolution
    left = (np.arange(patch_rows) - patch_rows // 2) * patch_resolution
    return np.broadcast_to(fwd[None, :], (patch_rows, patch_cols)), \
        np.broadcast_to(left[:, None], (patch_rows, patch_cols))


_DEFAULT_OFFSETS = patch_offsets()


def extract_patches(emap: ElevationMap, xs, ys, yaws, patch_cols=PATCH_COLS,
                    patch_rows=PATCH_ROWS, patch_resolution=PATCH_RESOLUTION):
    """Batched patch extraction; returns ``(cells (N, rows, cols), oob_counts (N,))``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_1d(np.asarray(ys, dtype=np.float64))
    yaws = np.atleast_1d(np.asarray(yaws, dtype=np.float64))
    if (patch_cols, patch_rows, patch_resolution) == (PATCH_COLS, PATCH_ROWS, PATCH_RESOLUTION):
        fwd, left = _DEFAULT_OFFSETS
    else:
        fwd, left = patch_offsets(patch_cols, patch_rows, patch_resolution)
    c = np.cos(yaws)[:, None, None]
    s = np.sin(yaws)[:, None, None]
    wx = xs[:, None, None] + c * fwd - s * left
    wy = ys[:, None, None] + s * fwd + c * left
    cells, oob = emap.sample(wx, wy, fill=0.0)
    return cells, oob.reshape(len(xs), -1).sum(axis=1)


def extract_patch(emap: ElevationMap, pose, patch_cols=PATCH_COLS, patch_rows=PATCH_ROWS,
                  patch_resolution=PATCH_RESOLUTION) -> ElevationPatch:
    x, y, yaw = (float(v) for v in pose)
    cells, oob = extract_patches(emap, [x], [y], [yaw], patch_cols, patch_rows, patch_resolution)
    return ElevationPatch(cells[0], (x, y, yaw), int(oob[0]))


def save_map(emap: ElevationMap, path):
    header = (f"{EMAP_MAGIC}\n{emap.cols} {emap.rows} {_fmt(emap.resolution)} "
              f"{_fmt(emap.origin_x)} {_fmt(emap.origin_y)}\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(emap.heights.astype("<f4").tobytes())


def read_magic(fh, magic):
    """Read and check the first line of a versioned binary file."""
    line = fh.readline()
    try:
        text = line.decode("ascii").rstrip("\n")
    except UnicodeDecodeError:
        raise MagicError(f"expected {magic!r}, got non-ASCII bytes") from None
    kind, _, version = magic.partition(" ")
    if text == magic:
        return
    if text.startswith(kind + " v"):
        raise VersionError(f"unsupported version {text!r}; this reader handles {magic!r}")
    raise MagicError(f"expected {magic!r}, got {text[:32]!r}")


def load_map(path) -> ElevationMap:
    with open(path, "rb") as fh:
        read_magic(fh, EMAP_MAGIC)
        line = fh.readline().decode("ascii", errors="replace")
        parts = line.split()
        if not line.endswith("\n") or len(parts) != 5:
            raise HeaderError(f"bad EMAP dims line {line!r}")
        try:
            cols, rows = int(parts[0]), int(parts[1])
            res, ox, oy = (float(p) for p in parts[2:])
        except ValueError:
            raise HeaderError(f"bad EMAP dims line {line!r}") from None
        if cols < 2 or rows < 2:
            raise HeaderError(f"bad EMAP dims {cols}x{rows}")
        payload = fh.read()
    need = cols * rows * 4
    if len(payload) < need:
        raise TruncatedError(f"payload has {len(payload)} bytes, need {need}")
    if len(payload) > need:
        raise FormatError(f"{len(payload) - need} trailing bytes after EMAP payload")
    heights = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return ElevationMap(heights, res, ox, oy)


def flat_map(height=0.0, cols=200, rows=100, resolution=0.008, origin_x=0.0, origin_y=0.0):
    return ElevationMap(np.full((rows, cols), height, dtype=np.float32), resolution, origin_x, origin_y)
