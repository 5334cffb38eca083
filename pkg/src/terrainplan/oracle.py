"""Ground-truth stand-in for the physical robot.

Poses settle rigidly on the terrain by a least-squares plane through the
wheel contact heights; stepping applies noisy Ackermann kinematics with a
wheel step-height immobilization rule and a rollover limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import ackermann_step
from .errors import (FormatError, HeaderError, MagicError, OutOfMapError, PolicyError, TruncatedError,
                     VersionError)
from .state import ControlInput, VehicleState, wrap_angle
from .terrain import ElevationMap
from .vehicle import VehicleGeometry

IMMOBILIZED_STEPS = 5
SLIP_NOISE_STD = 0.05
EPLOG_MAGIC = "EPLOG v1"


class Status(str, Enum):
    OK = "ok"
    BLOCKED = "blocked"
    ROLLED_OVER = "rolled_over"
    OUT_OF_BOUNDS = "out_of_bounds"


class Outcome(str, Enum):
    REACHED_GOAL = "reached_goal"
    ROLLED_OVER = "rolled_over"
    IMMOBILIZED = "immobilized"
    OUT_OF_BOUNDS = "out_of_bounds"
    TIMEOUT = "timeout"


def contact_world(x, y, yaw, geometry: VehicleGeometry):
    c, s = math.cos(yaw), math.sin(yaw)
    p = geometry.contact_array
    return x + c * p[:, 0] - s * p[:, 1], y + s * p[:, 0] + c * p[:, 1]


def settle_pose(emap: ElevationMap, x, y, yaw, geometry: VehicleGeometry):
    """Rest the chassis on the terrain; returns ``(z, roll, pitch)``.

    Pitch is positive nose-up and roll positive left-side-up, i.e. the
    body-frame inclinations of the fitted contact plane. Raises
    :class:`OutOfMapError` if a contact point is off the map.
    """
    wx, wy = contact_world(x, y, yaw, geometry)
    h, oob = emap.sample(wx, wy)
    if oob.any():
        raise OutOfMapError(f"{int(oob.sum())} contact point(s) off the map at ({x:.3f}, {y:.3f})")
    offset, slope_fwd, slope_left = geometry.plane_fit_matrix @ h
    pitch = math.atan(slope_fwd)
    roll = math.atan2(slope_left, math.sqrt(1.0 + slope_fwd * slope_fwd))
    return float(offset), roll, pitch


def settle_state(emap, x, y, yaw, geometry, t=0):
    z, roll, pitch = settle_pose(emap, x, y, yaw, geometry)
    return VehicleState(x, y, z, roll, pitch, wrap_angle(yaw), t)


@dataclass
class StepResult:
    state: VehicleState
    status: Status
    applied: ControlInput  # command after slip noise

    @property
    def blocked(self):
        return self.status is Status.BLOCKED


def apply_slip(inp: ControlInput, slip_noise_std, rng):
    if not slip_noise_std or rng is None:
        return inp
    nv, nw = rng.normal(0.0, slip_noise_std, 2)
    return ControlInput(inp.v * (1.0 + nv), inp.omega * (1.0 + nw))


def max_wheel_rise(emap, state: VehicleState, x1, y1, yaw1, geometry):
    """Largest terrain rise any wheel meets along its straight path to the new pose."""
    x0, y0 = contact_world(state.x, state.y, state.yaw, geometry)
    xe, ye = contact_world(x1, y1, yaw1, geometry)
    dist = float(np.max(np.hypot(xe - x0, ye - y0)))
    n = max(2, int(math.ceil(dist / emap.resolution)) + 1)
    s = np.linspace(0.0, 1.0, n)[None, :]
    px = x0[:, None] + s * (xe - x0)[:, None]
    py = y0[:, None] + s * (ye - y0)[:, None]
    h, oob = emap.sample(px, py)
    if oob.any():
        return 0.0
    return float(np.max(h.max(axis=1) - h[:, 0]))


def step_oracle(state: VehicleState, inp: ControlInput, emap: ElevationMap, geometry: VehicleGeometry,
                dt, slip_noise_std=0.0, rng=None) -> StepResult:
    if not dt > 0:
        raise ValueError("dt must be positive")
    applied = apply_slip(inp, slip_noise_std, rng)
    x1, y1, yaw1 = ackermann_step(state.x, state.y, state.yaw, applied, dt)
    t1 = state.t + 1
    try:
        rise = max_wheel_rise(emap, state, x1, y1, yaw1, geometry)
        blocked = rise > geometry.max_climb_height
        if blocked:
            x1, y1, yaw1 = state.x, state.y, state.yaw
        z, roll, pitch = settle_pose(emap, x1, y1, yaw1, geometry)
    except OutOfMapError:
        moved = VehicleState(x1, y1, state.z, state.roll, state.pitch, yaw1, t1)
        return StepResult(moved, Status.OUT_OF_BOUNDS, applied)
    new = VehicleState(x1, y1, z, roll, pitch, yaw1, t1)
    if abs(roll) > geometry.rollover_limit or abs(pitch) > geometry.rollover_limit:
        return StepResult(new, Status.ROLLED_OVER, applied)
    return StepResult(new, Status.BLOCKED if blocked else Status.OK, applied)


@dataclass
class EpisodeResult:
    outcome: Outcome
    trajectory: list
    inputs: list
    dt: float
    mean_abs_roll: float = field(init=False)
    mean_abs_pitch: float = field(init=False)

    def __post_init__(self):
        self.outcome = Outcome(self.outcome)
        if not self.trajectory:
            raise ValueError("trajectory must contain at least the start state")
        self.mean_abs_roll = float(np.mean([abs(s.roll) for s in self.trajectory]))
        self.mean_abs_pitch = float(np.mean([abs(s.pitch) for s in self.trajectory]))

    @property
    def traversal_time(self):
        return (len(self.trajectory) - 1) * self.dt

    @property
    def success(self):
        return self.outcome is Outcome.REACHED_GOAL


def run_episode(emap: ElevationMap, start: VehicleState, goal, goal_radius, policy, geometry: VehicleGeometry,
                dt=0.5, max_steps=200, seed=0, slip_noise_std=SLIP_NOISE_STD,
                immobilized_steps=IMMOBILIZED_STEPS) -> EpisodeResult:
    """Drive ``policy`` (callable state -> ControlInput) until a terminal event.

    The start pose is re-settled on the terrain before the first step.
    """
    rng = np.random.default_rng(seed)
    state = settle_state(emap, start.x, start.y, start.yaw, geometry, start.t)
    gx, gy = goal
    trajectory, inputs = [state], []
    stuck = 0

    def at_goal(s):
        return math.hypot(s.x - gx, s.y - gy) <= goal_radius

    if at_goal(state):
        return EpisodeResult(Outcome.REACHED_GOAL, trajectory, inputs, dt)
    for _ in range(max_steps):
        inp = policy(state)
        if not isinstance(inp, ControlInput) or not inp.is_finite():
            raise PolicyError(f"policy returned invalid input {inp!r}")
        result = step_oracle(state, inp, emap, geometry, dt, slip_noise_std, rng)
        state = result.state
        trajectory.append(state)
        inputs.append(inp)
        if result.status is Status.ROLLED_OVER:
            return EpisodeResult(Outcome.ROLLED_OVER, trajectory, inputs, dt)
        if result.status is Status.OUT_OF_BOUNDS:
            return EpisodeResult(Outcome.OUT_OF_BOUNDS, trajectory, inputs, dt)
        stuck = stuck + 1 if result.blocked else 0
        if stuck >= immobilized_steps:
            return EpisodeResult(Outcome.IMMOBILIZED, trajectory, inputs, dt)
        if at_goal(state):
            return EpisodeResult(Outcome.REACHED_GOAL, trajectory, inputs, dt)
    return EpisodeResult(Outcome.TIMEOUT, trajectory, inputs, dt)


def save_episode_log(result: EpisodeResult, path):
    """EPLOG v1: header, one CSV row per state (the last row has empty v, omega), outcome line."""
    lines = [f"{EPLOG_MAGIC} dt={result.dt!r}"]
    for k, s in enumerate(result.trajectory):
        if k < len(result.inputs):
            u = result.inputs[k]
            tail = f"{u.v!r},{u.omega!r}"
        else:
            tail = ","
        lines.append(f"{s.t},{s.x!r},{s.y!r},{s.z!r},{s.roll!r},{s.pitch!r},{s.yaw!r},{tail}")
    lines.append(f"outcome={result.outcome.value}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_episode_log(path) -> EpisodeResult:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("EPLOG "):
        raise MagicError(f"not an episode log: {path}")
    head = lines[0].split()
    if head[1] != "v1":
        raise VersionError(f"unsupported episode log version {head[1]!r}")
    try:
        dt = float(head[2].partition("=")[2])
    except (IndexError, ValueError):
        raise HeaderError(f"bad EPLOG header {lines[0]!r}") from None
    if len(lines) < 2 or not lines[-1].startswith("outcome="):
        raise TruncatedError("episode log has no outcome line")
    trajectory, inputs = [], []
    for row in lines[1:-1]:
        parts = row.split(",")
        if len(parts) != 9:
            raise FormatError(f"bad EPLOG row {row!r}")
        try:
            t = int(parts[0])
            x, y, z, roll, pitch, yaw = (float(p) for p in parts[1:7])
            trajectory.append(VehicleState(x, y, z, roll, pitch, yaw, t))
            if parts[7] != "":
                inputs.append(ControlInput(float(parts[7]), float(parts[8])))
        except ValueError:
            raise FormatError(f"bad EPLOG row {row!r}") from None
    try:
        outcome = Outcome(lines[-1].partition("=")[2])
    except ValueError:
        raise FormatError(f"unknown outcome {lines[-1]!r}") from None
    return EpisodeResult(outcome, trajectory, inputs, dt)
