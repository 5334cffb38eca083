"""Vehicle state and control input shared across the simulator, model and planner."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a):
    """Wrap an angle (scalar or array) to [-pi, pi); in-range values pass through untouched."""
    wrapped = (a + math.pi) % (2.0 * math.pi) - math.pi
    if isinstance(a, np.ndarray):
        return np.where((a >= -math.pi) & (a < math.pi), a, wrapped)
    return a if -math.pi <= a < math.pi else wrapped


@dataclass(frozen=True)
class VehicleState:
    """6-DoF pose at a timestep. ``off_map`` is set by the learned model when a
    predicted pose leaves the elevation map."""

    x: float
    y: float
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    t: int = 0
    off_map: bool = False

    def __post_init__(self):
        # normalize numpy scalars so reprs (and therefore logs) stay plain
        for name in ("x", "y", "z", "roll", "pitch", "yaw"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "off_map", bool(self.off_map))

    @property
    def planar(self):
        return (self.x, self.y, self.yaw)

    def as_tuple(self):
        return (self.x, self.y, self.z, self.roll, self.pitch, self.yaw)

    def is_finite(self):
        return all(math.isfinite(v) for v in self.as_tuple())


@dataclass(frozen=True)
class ControlInput:
    v: float
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "omega", float(self.omega))

    def is_finite(self):
        return math.isfinite(self.v) and math.isfinite(self.omega)

    def check(self, bound=1.0):
        if not self.is_finite():
            raise ValueError(f"non-finite control input {self}")
        if abs(self.v) > bound or abs(self.omega) > bound:
            raise ValueError(f"control input {self} exceeds sanity bound {bound}")
        return self
