"""Decomposed forward dynamics: analytic planar Ackermann motion, terrain height
lookup for z, and the learned network for roll and pitch."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import neuralnet
from .state import ControlInput, VehicleState, wrap_angle
from .terrain import ElevationMap, extract_patches
from .vehicle import geometry_preset

OMEGA_EPSILON = 1e-4


def ackermann_step(x, y, yaw, inp: ControlInput, dt, omega_epsilon=OMEGA_EPSILON):
    """Advance a planar pose by holding ``(v, omega)`` for ``dt`` seconds.

    Arc update for ``|omega| > epsilon``; below it the chord is taken along the
    mid-step heading, which is the small-angle limit of the arc, so the two
    branches agree to O(v * omega^2 * dt^3).
    """
    v, w = inp.v, inp.omega
    yaw_next = yaw + w * dt
    if abs(w) > omega_epsilon:
        r = v / w
        x_next = x + r * (math.sin(yaw_next) - math.sin(yaw))
        y_next = y - r * (math.cos(yaw_next) - math.cos(yaw))
    else:
        mid = yaw + 0.5 * w * dt
        x_next = x + v * math.cos(mid) * dt
        y_next = y + v * math.sin(mid) * dt
    return x_next, y_next, wrap_angle(yaw_next)


def ackermann_arrays(x, y, yaw, v, omega, dt, omega_epsilon=OMEGA_EPSILON):
    """Vectorized :func:`ackermann_step` over broadcastable arrays."""
    x, y, yaw, v, omega = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (x, y, yaw, v, omega)))
    yaw_next = yaw + omega * dt
    arc = np.abs(omega) > omega_epsilon
    safe_w = np.where(arc, omega, 1.0)
    r = v / safe_w
    mid = yaw + 0.5 * omega * dt
    x_next = np.where(arc, x + r * (np.sin(yaw_next) - np.sin(yaw)), x + v * np.cos(mid) * dt)
    y_next = np.where(arc, y - r * (np.cos(yaw_next) - np.cos(yaw)), y + v * np.sin(mid) * dt)
    return x_next, y_next, wrap_angle(yaw_next)


@dataclass
class DynamicsConfig:
    model: neuralnet.MlpModel = None
    dt: float = 1.0
    omega_epsilon: float = OMEGA_EPSILON
    geometry: str = "v6w"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.omega_epsilon > 0:
            raise ValueError("omega_epsilon must be positive")
        if self.model is None:
            self.model = neuralnet.zero_model()


def normalize_patches(patch_t, patch_t1, z, height_scale):
    """Stack two patch batches into vehicle-relative, scaled head inputs (N, 8000)."""
    n = patch_t.shape[0]
    z = np.asarray(z, dtype=np.float64).reshape(n, 1)
    head = np.concatenate([patch_t.reshape(n, -1), patch_t1.reshape(n, -1)], axis=1).astype(np.float64)
    head -= z
    if height_scale != 1.0:
        head /= height_scale
    return head


class _Stepper:
    """Batched predict_next with patch reuse between consecutive steps."""

    def __init__(self, emap: ElevationMap, config: DynamicsConfig):
        self.emap = emap
        self.config = config
        self.contacts = geometry_preset(config.geometry).contact_array

    def off_map(self, x, y, yaw, center_oob):
        c, s = np.cos(yaw)[:, None], np.sin(yaw)[:, None]
        fx, ly = self.contacts[:, 0][None, :], self.contacts[:, 1][None, :]
        _, oob = self.emap.sample(x[:, None] + c * fx - s * ly, y[:, None] + s * fx + c * ly)
        return center_oob | oob.any(axis=1)

    def step(self, S, v, omega, patch_cur=None):
        """S is (N, 6) [x, y, z, roll, pitch, yaw]; returns (S_next, off_map, patch_next)."""
        x, y, z, roll, pitch, yaw = S.T
        if patch_cur is None:
            patch_cur, _ = extract_patches(self.emap, x, y, yaw)
        xn, yn, yawn = ackermann_arrays(x, y, yaw, v, omega, self.config.dt, self.config.omega_epsilon)
        zn, center_oob = self.emap.sample(xn, yn)
        zn = np.where(center_oob, z, zn)
        patch_next, _ = extract_patches(self.emap, xn, yn, yawn)
        model = self.config.model
        head = normalize_patches(patch_cur, patch_next, z, model.height_scale)
        att = neuralnet.forward(model, head, np.column_stack([roll, pitch]))
        S_next = np.column_stack([xn, yn, zn, att[:, 0], att[:, 1], yawn])
        return S_next, self.off_map(xn, yn, yawn, center_oob), patch_next


def predict_next(state: VehicleState, inp: ControlInput, emap: ElevationMap, config: DynamicsConfig) -> VehicleState:
    """One step of the learned forward model; sets ``off_map`` when the pose leaves the map."""
    S = np.array([state.as_tuple()], dtype=np.float64)
    S_next, off, _ = _Stepper(emap, config).step(S, np.array([inp.v]), np.array([inp.omega]))
    return _to_state(S_next[0], state.t + 1, bool(off[0]))


def _to_state(row, t, off):
    x, y, z, roll, pitch, yaw = (float(v) for v in row)
    return VehicleState(x, y, z, roll, pitch, yaw, t, off)


def rollout_arrays(start, v, omega, steps, emap: ElevationMap, config: DynamicsConfig):
    """Roll out N constant-input candidates from a common start.

    ``start`` is a length-6 state vector; ``v`` and ``omega`` are (N,) arrays
    held for every step. Returns ``(states (N, steps+1, 6), off_map (N, steps+1))``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=np.float64))
    n = omega.shape[0]
    v = np.broadcast_to(np.asarray(v, dtype=np.float64), (n,))
    stepper = _Stepper(emap, config)
    out = np.empty((n, steps + 1, 6))
    flags = np.zeros((n, steps + 1), dtype=bool)
    out[:, 0] = np.asarray(start, dtype=np.float64)
    patch = None
    for k in range(steps):
        out[:, k + 1], flags[:, k + 1], patch = stepper.step(out[:, k], v, omega, patch)
    return out, flags


def rollout(state: VehicleState, inputs, emap: ElevationMap, config: DynamicsConfig):
    """Sequential predict_next over ``inputs``; returns len(inputs) + 1 states."""
    inputs = list(inputs)
    if not inputs:
        raise ValueError("rollout needs at least one input")
    stepper = _Stepper(emap, config)
    states = [state]
    S = np.array([state.as_tuple()], dtype=np.float64)
    patch = None
    for inp in inputs:
        S, off, patch = stepper.step(S, np.array([inp.v]), np.array([inp.omega]), patch)
        states.append(_to_state(S[0], states[-1].t + 1, bool(off[0])))
    return states
