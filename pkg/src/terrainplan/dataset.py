"""Training data: frames <x_t, x_t+1, m_t, u_t> collected by driving the oracle.

Frames are held as float32 arrays matching the VDST file layout, so saving
and loading is exact. Per frame the file stores

    12 floats  state_t   [x, y, z, roll, pitch, yaw, t, anchor_x, anchor_y, anchor_yaw, oob_count, applied_v]
    12 floats  state_t1  [x, y, z, roll, pitch, yaw, t, anchor_x, anchor_y, anchor_yaw, oob_count, applied_omega]
     2 floats  input     [v, omega] as commanded
  8000 floats  patch_t (40 x 100) then patch_t1 (40 x 100)

where the anchors are the poses each patch was extracted at and the applied
command is the slip-perturbed input the oracle actually executed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ackermann_step
from .errors import (CollectionError, FormatError, HeaderError, OutOfMapError, ParameterError, ShapeError,
                     TruncatedError)
from .oracle import SLIP_NOISE_STD, Status, settle_state, step_oracle
from .state import ControlInput, VehicleState
from .terrain import PATCH_CELLS, PATCH_COLS, PATCH_ROWS, ElevationPatch, extract_patches, read_magic

VDST_MAGIC = "VDST v1"
STATE_FIELDS = 12
HEAD_CELLS = 2 * PATCH_CELLS
RECORD = 2 * STATE_FIELDS + 2 + HEAD_CELLS


@dataclass(frozen=True)
class NormStats:
    height_offset_mode: str = "relative_z"
    height_scale: float = 1.0


@dataclass
class TrainingFrame:
    state_t: VehicleState
    state_t1: VehicleState
    patch_t: ElevationPatch
    patch_t1: ElevationPatch
    input_t: ControlInput
    applied_t: ControlInput = None


def _state_row(s: VehicleState, anchor, oob, extra):
    return [s.x, s.y, s.z, s.roll, s.pitch, s.yaw, float(s.t), *anchor, float(oob), extra]


def _row_state(row):
    x, y, z, roll, pitch, yaw, t = (float(v) for v in row[:7])
    return VehicleState(x, y, z, roll, pitch, yaw, int(round(t)))


class Dataset:
    def __init__(self, states_t, states_t1, inputs, patches, norm_stats=None, source_meta=None):
        self.states_t = np.ascontiguousarray(states_t, dtype=np.float32).reshape(-1, STATE_FIELDS)
        self.states_t1 = np.ascontiguousarray(states_t1, dtype=np.float32).reshape(-1, STATE_FIELDS)
        self.inputs = np.ascontiguousarray(inputs, dtype=np.float32).reshape(-1, 2)
        patches = np.asarray(patches, dtype=np.float32)
        n = self.states_t.shape[0]
        if patches.size != n * HEAD_CELLS:
            raise ShapeError(f"patches must hold {HEAD_CELLS} cells per frame")
        self.patches = patches.reshape(n, 2, PATCH_ROWS, PATCH_COLS)
        if not (self.states_t1.shape[0] == self.inputs.shape[0] == n):
            raise ShapeError("frame arrays disagree on length")
        self.norm_stats = norm_stats or compute_norm_stats(self)
        self.source_meta = dict(source_meta or {})

    def __len__(self):
        return self.states_t.shape[0]

    def __getitem__(self, i) -> TrainingFrame:
        st, st1 = self.states_t[i], self.states_t1[i]
        return TrainingFrame(
            _row_state(st), _row_state(st1),
            ElevationPatch(self.patches[i, 0], tuple(float(v) for v in st[7:10]), int(st[10])),
            ElevationPatch(self.patches[i, 1], tuple(float(v) for v in st1[7:10]), int(st1[10])),
            ControlInput(float(self.inputs[i, 0]), float(self.inputs[i, 1])),
            ControlInput(float(st[11]), float(st1[11])),
        )

    @property
    def frames(self):
        return [self[i] for i in range(len(self))]

    def subset(self, idx, norm_stats=None):
        idx = np.asarray(idx)
        return Dataset(self.states_t[idx], self.states_t1[idx], self.inputs[idx], self.patches[idx],
                       norm_stats or None, self.source_meta)

    def batch(self, idx, height_scale=None):
        """Normalized ``(head_inputs, extras, targets)`` for frame indices ``idx``."""
        scale = self.norm_stats.height_scale if height_scale is None else height_scale
        idx = np.asarray(idx)
        head = self.patches[idx].reshape(len(idx), HEAD_CELLS).astype(np.float64)
        head -= self.states_t[idx, 2:3].astype(np.float64)
        if scale != 1.0:
            head /= scale
        extras = self.states_t[idx, 3:5].astype(np.float64)
        targets = self.states_t1[idx, 3:5].astype(np.float64)
        return head, extras, targets

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.norm_stats == other.norm_stats and self.source_meta == other.source_meta
                and all(np.array_equal(a, b) for a, b in (
                    (self.states_t, other.states_t), (self.states_t1, other.states_t1),
                    (self.inputs, other.inputs), (self.patches, other.patches))))


def compute_norm_stats(ds: Dataset, chunk=1024) -> NormStats:
    """Standard deviation of vehicle-relative patch heights (floored at 1 mm)."""
    n = len(ds)
    if n == 0:
        return NormStats()
    total = total_sq = 0.0
    for start in range(0, n, chunk):
        rel = ds.patches[start:start + chunk].reshape(-1, HEAD_CELLS).astype(np.float64)
        rel -= ds.states_t[start:start + chunk, 2:3]
        total += float(rel.sum())
        total_sq += float(np.square(rel).sum())
    count = n * HEAD_CELLS
    var = max(total_sq / count - (total / count) ** 2, 0.0)
    return NormStats("relative_z", max(math.sqrt(var), 1e-3))


def normalize_frame(frame: TrainingFrame, norm_stats: NormStats):
    """Returns ``(head_input (8000,), extra (2,), target (2,))``."""
    for p in (frame.patch_t, frame.patch_t1):
        if np.asarray(p.cells).size != PATCH_CELLS:
            raise ShapeError(f"patch has {np.asarray(p.cells).size} cells, expected {PATCH_CELLS}")
    head = np.concatenate([np.asarray(frame.patch_t.cells, dtype=np.float64).ravel(),
                           np.asarray(frame.patch_t1.cells, dtype=np.float64).ravel()])
    head = (head - frame.state_t.z) / norm_stats.height_scale
    extra = np.array([frame.state_t.roll, frame.state_t.pitch])
    target = np.array([frame.state_t1.roll, frame.state_t1.pitch])
    return head, extra, target


def random_walk_driver(rng, v=0.2, omega_step=0.15, omega_max=0.78):
    """Constant speed with a smoothly wandering yaw rate."""
    omega = 0.0

    def drive(state):
        nonlocal omega
        omega = float(np.clip(omega + rng.normal(0.0, omega_step), -omega_max, omega_max))
        return ControlInput(v, omega)

    return drive


def _random_start(emap, geometry, rng, attempts=200):
    x0, x1, y0, y1 = emap.extent
    margin = 0.5 * geometry.length + 0.02
    if x1 - x0 <= 2 * margin or y1 - y0 <= 2 * margin * 0.5:
        return None
    for _ in range(attempts):
        x = rng.uniform(x0 + margin, x1 - margin)
        y = rng.uniform(y0 + 0.5 * margin, y1 - 0.5 * margin)
        yaw = rng.uniform(-math.pi, math.pi)
        try:
            s = settle_state(emap, x, y, yaw, geometry)
        except OutOfMapError:
            continue
        if abs(s.roll) < geometry.rollover_limit and abs(s.pitch) < geometry.rollover_limit:
            return s
    return None


def collect(maps, geometry, n_frames, driver_policy=None, dt=1.0, seed=0,
            slip_noise_std=SLIP_NOISE_STD, episode_steps=40, blocked_steps=1) -> Dataset:
    """Drive randomized-start episodes round-robin over ``maps`` until ``n_frames`` frames.

    ``driver_policy`` is a factory ``rng -> (state -> ControlInput)``; the
    default is :func:`random_walk_driver`. Rollover frames are kept with the
    failed state as the label; off-map steps are dropped; an episode also ends
    after ``blocked_steps`` consecutive blocked steps (repeated blocked frames
    are near-duplicates and would otherwise dominate rough terrain).
    """
    if n_frames <= 0:
        raise ParameterError("n_frames", "must be positive")
    maps = list(maps)
    if not maps:
        raise ParameterError("maps", "need at least one map")
    make_driver = driver_policy or random_walk_driver
    rng = np.random.default_rng(seed)
    st, st1, ins, pat = (np.empty((n_frames, STATE_FIELDS), np.float32), np.empty((n_frames, STATE_FIELDS), np.float32),
                         np.empty((n_frames, 2), np.float32), np.empty((n_frames, 2, PATCH_ROWS, PATCH_COLS), np.float32))
    count = 0
    episode = 0
    dead = set()
    while count < n_frames:
        m = episode % len(maps)
        episode += 1
        if m in dead:
            if len(dead) == len(maps):
                raise CollectionError("no map admits a valid start pose")
            continue
        emap = maps[m]
        state = _random_start(emap, geometry, rng)
        if state is None:
            dead.add(m)
            if len(dead) == len(maps):
                raise CollectionError("no map admits a valid start pose")
            continue
        driver = make_driver(rng)
        stuck = 0
        for _ in range(episode_steps):
            inp = driver(state)
            result = step_oracle(state, inp, emap, geometry, dt, slip_noise_std, rng)
            if result.status is Status.OUT_OF_BOUNDS:
                break
            px, py, pyaw = ackermann_step(state.x, state.y, state.yaw, inp, dt)
            cells, oob = extract_patches(emap, [state.x, px], [state.y, py], [state.yaw, pyaw])
            nxt = result.state
            st[count] = _state_row(state, (state.x, state.y, state.yaw), oob[0], result.applied.v)
            st1[count] = _state_row(nxt, (px, py, pyaw), oob[1], result.applied.omega)
            ins[count] = (inp.v, inp.omega)
            pat[count] = cells
            count += 1
            stuck = stuck + 1 if result.blocked else 0
            if count == n_frames or result.status is Status.ROLLED_OVER or stuck >= blocked_steps:
                break
            state = nxt
    meta = {"seed": str(seed), "geometry": geometry.name, "maps": str(len(maps)), "dt": repr(float(dt))}
    return Dataset(st, st1, ins, pat, None, meta)


def split(dataset: Dataset, train_fraction, seed=0):
    if not 0 < train_fraction < 1:
        raise ParameterError("train_fraction", "must lie strictly between 0 and 1")
    n = len(dataset)
    n_train = int(round(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise ParameterError("train_fraction", f"split of {n} frames leaves one side empty")
    order = np.random.default_rng(seed).permutation(n)
    train = dataset.subset(np.sort(order[:n_train]))
    val = dataset.subset(np.sort(order[n_train:]), norm_stats=train.norm_stats)
    return train, val


def _header(ds: Dataset):
    meta = " ".join(f"meta.{k}={v}" for k, v in sorted(ds.source_meta.items()))
    return (f"{VDST_MAGIC}\n{len(ds)} patch_cells={HEAD_CELLS} offset={ds.norm_stats.height_offset_mode} "
            f"height_scale={ds.norm_stats.height_scale!r} {meta}".rstrip() + "\n").encode("ascii")


def save_dataset(ds: Dataset, path, chunk=1024):
    with open(path, "wb") as fh:
        fh.write(_header(ds))
        for start in range(0, len(ds), chunk):
            sl = slice(start, start + chunk)
            n = len(ds.states_t[sl])
            rec = np.empty((n, RECORD), dtype="<f4")
            rec[:, :STATE_FIELDS] = ds.states_t[sl]
            rec[:, STATE_FIELDS:2 * STATE_FIELDS] = ds.states_t1[sl]
            rec[:, 2 * STATE_FIELDS:2 * STATE_FIELDS + 2] = ds.inputs[sl]
            rec[:, 2 * STATE_FIELDS + 2:] = ds.patches[sl].reshape(n, HEAD_CELLS)
            fh.write(rec.tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        read_magic(fh, VDST_MAGIC)
        line = fh.readline().decode("ascii", errors="replace")
        payload = fh.read()
    parts = line.split()
    try:
        n = int(parts[0])
        fields = dict(p.split("=", 1) for p in parts[1:])
        cells = int(fields["patch_cells"])
        stats = NormStats(fields.get("offset", "relative_z"), float(fields.get("height_scale", "1.0")))
    except (IndexError, KeyError, ValueError):
        raise HeaderError(f"bad VDST header {line!r}") from None
    if cells != HEAD_CELLS:
        raise ShapeError(f"file stores {cells} patch cells per frame, expected {HEAD_CELLS}")
    if n < 0:
        raise HeaderError(f"negative frame count {n}")
    need = n * RECORD * 4
    if len(payload) < need:
        raise TruncatedError(f"payload has {len(payload)} bytes, need {need}")
    if len(payload) > need:
        raise FormatError(f"{len(payload) - need} trailing bytes after VDST payload")
    rec = np.frombuffer(payload, dtype="<f4").reshape(n, RECORD)
    meta = {k[5:]: v for k, v in fields.items() if k.startswith("meta.")}
    return Dataset(rec[:, :STATE_FIELDS], rec[:, STATE_FIELDS:2 * STATE_FIELDS],
                   rec[:, 2 * STATE_FIELDS:2 * STATE_FIELDS + 2], rec[:, 2 * STATE_FIELDS + 2:], stats, meta)
