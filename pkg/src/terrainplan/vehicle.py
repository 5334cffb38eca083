"""Vehicle geometry presets for the six- and four-wheeled platforms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class VehicleGeometry:
    name: str
    length: float
    width: float
    height: float
    wheelbase: float
    contact_points: tuple  # body-frame (forward, left) offsets in meters
    max_climb_height: float
    rollover_limit: float = math.radians(30.0)
    max_steering: float = 1.0

    def __post_init__(self):
        if not self.length > self.wheelbase > 0:
            raise ParameterError("wheelbase", "need length > wheelbase > 0")
        if len(self.contact_points) < 4:
            raise ParameterError("contact_points", "need at least 4 contact points")
        fwd = [p[0] for p in self.contact_points]
        if not (min(fwd) < 0 < max(fwd)):
            raise ParameterError("contact_points", "contacts must span both axles")
        if not 0 < self.rollover_limit < math.pi / 2:
            raise ParameterError("rollover_limit", "must lie in (0, pi/2)")
        if self.max_climb_height <= 0:
            raise ParameterError("max_climb_height", "must be positive")

    @cached_property
    def contact_array(self):
        return np.asarray(self.contact_points, dtype=np.float64)

    @cached_property
    def plane_fit_matrix(self):
        """3 x n pseudo-inverse mapping contact heights to (offset, slope_fwd, slope_left)."""
        c = self.contact_array
        design = np.column_stack([np.ones(len(c)), c[:, 0], c[:, 1]])
        return np.linalg.pinv(design)


def _wheels(half_base, half_track, middle=False):
    xs = (half_base, 0.0, -half_base) if middle else (half_base, -half_base)
    return tuple((x, s * half_track) for x in xs for s in (1.0, -1.0))


V6W = VehicleGeometry(
    name="v6w", length=0.863, width=0.249, height=0.2, wheelbase=0.6,
    contact_points=_wheels(0.3, 0.11, middle=True), max_climb_height=0.20,
)
V4W = VehicleGeometry(
    name="v4w", length=0.523, width=0.249, height=0.2, wheelbase=0.32,
    contact_points=_wheels(0.16, 0.11), max_climb_height=0.15,
)
PRESETS = {"v6w": V6W, "v4w": V4W}


def geometry_preset(name):
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ParameterError("geometry", f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
