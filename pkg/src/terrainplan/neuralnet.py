"""Fully connected attitude predictor with analytic backprop and an H-weighted loss.

The network is a head (patch heights -> embedding) followed by a tail that
also sees the current roll and pitch:

    head: 8000 -> 64 -> 32 -> 8   (tanh)
    tail: [embedding, roll, pitch] 10 -> 8 (tanh) -> 2 (linear)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, HeaderError, ParameterError, ShapeError, SizeMismatchError, TruncatedError

VMLP_MAGIC = "VMLP v1"
HEAD_SIZES = (8000, 64, 32, 8)
TAIL_SIZES = (10, 8, 2)
EXTRA_INPUTS = 2

_ACT = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "linear": (lambda z: z, lambda a: np.ones_like(a)),
}


@dataclass
class MlpModel:
    head_sizes: tuple = HEAD_SIZES
    tail_sizes: tuple = TAIL_SIZES
    weights: list = field(default_factory=list)  # each (fan_in, fan_out)
    biases: list = field(default_factory=list)
    activations: tuple = ()
    rng_seed: int = 0
    # divisor applied to vehicle-relative heights before the head
    height_scale: float = 1.0

    def __post_init__(self):
        self.head_sizes = tuple(int(s) for s in self.head_sizes)
        self.tail_sizes = tuple(int(s) for s in self.tail_sizes)
        if len(self.head_sizes) < 2 or len(self.tail_sizes) < 2:
            raise ParameterError("layers", "head and tail need at least one layer each")
        if self.tail_sizes[0] != self.head_sizes[-1] + EXTRA_INPUTS:
            raise ParameterError("tail_sizes", "tail input must equal head output + 2")
        if self.tail_sizes[-1] != 2:
            raise ParameterError("tail_sizes", "final layer must have 2 outputs")
        if not self.activations:
            self.activations = ("tanh",) * (self.n_layers - 1) + ("linear",)
        self.activations = tuple(self.activations)
        if len(self.activations) != self.n_layers or any(a not in _ACT for a in self.activations):
            raise ParameterError("activations", f"need {self.n_layers} names from {sorted(_ACT)}")
        if not self.weights:
            self.weights = [np.zeros(s) for s in self.layer_shapes]
            self.biases = [np.zeros(s[1]) for s in self.layer_shapes]
        for w, b, s in zip(self.weights, self.biases, self.layer_shapes):
            if w.shape != s or b.shape != (s[1],):
                raise ShapeError(f"parameter shape {w.shape}/{b.shape} does not match layer {s}")

    @property
    def layer_shapes(self):
        h, t = self.head_sizes, self.tail_sizes
        return [(h[i], h[i + 1]) for i in range(len(h) - 1)] + [(t[i], t[i + 1]) for i in range(len(t) - 1)]

    @property
    def n_layers(self):
        return len(self.head_sizes) + len(self.tail_sizes) - 2

    @property
    def n_head_layers(self):
        return len(self.head_sizes) - 1

    @property
    def n_params(self):
        return sum(a * b + b for a, b in self.layer_shapes)

    def copy(self):
        return MlpModel(self.head_sizes, self.tail_sizes, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.activations, self.rng_seed, self.height_scale)

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def all_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.params())

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        return ((self.head_sizes, self.tail_sizes, self.activations, self.rng_seed, self.height_scale)
                == (other.head_sizes, other.tail_sizes, other.activations, other.rng_seed, other.height_scale)
                and all(np.array_equal(a, b) for a, b in zip(self.params(), other.params())))


def init_model(seed=0, head_sizes=HEAD_SIZES, tail_sizes=TAIL_SIZES, height_scale=1.0):
    """uniform(-s, s) weights and biases with s = 1/sqrt(fan_in)."""
    model = MlpModel(head_sizes, tail_sizes, rng_seed=seed, height_scale=height_scale)
    rng = np.random.default_rng(seed)
    for i, (fan_in, fan_out) in enumerate(model.layer_shapes):
        s = 1.0 / math.sqrt(fan_in)
        model.weights[i] = rng.uniform(-s, s, (fan_in, fan_out))
        model.biases[i] = rng.uniform(-s, s, fan_out)
    return model


def zero_model(head_sizes=HEAD_SIZES, tail_sizes=TAIL_SIZES):
    return MlpModel(head_sizes, tail_sizes)


class LossWeights:
    """Symmetric positive definite 2x2 weighting of the attitude residual."""

    def __init__(self, H=None):
        H = np.eye(2) if H is None else np.array(H, dtype=np.float64)
        if H.shape != (2, 2):
            raise ParameterError("H", "must be 2x2")
        if not np.all(np.isfinite(H)) or np.max(np.abs(H - H.T)) > 1e-12:
            raise ParameterError("H", "must be finite and symmetric")
        if np.min(np.linalg.eigvalsh(H)) <= 0:
            raise ParameterError("H", "must be positive definite")
        self.H = H

    def __repr__(self):
        return f"LossWeights({self.H.tolist()})"


def _as_H(H):
    if H is None:
        return np.eye(2)
    if isinstance(H, LossWeights):
        return H.H
    return np.asarray(H, dtype=np.float64)


def _check_inputs(model, head_input, extra):
    head_input = np.asarray(head_input, dtype=np.float64)
    extra = np.asarray(extra, dtype=np.float64)
    single = head_input.ndim == 1
    if single:
        head_input, extra = head_input[None, :], extra[None, :]
    if head_input.ndim != 2 or head_input.shape[1] != model.head_sizes[0]:
        raise ShapeError(f"head input must have {model.head_sizes[0]} values, got {head_input.shape[-1]}")
    if extra.shape != (head_input.shape[0], EXTRA_INPUTS):
        raise ShapeError(f"extra input must have {EXTRA_INPUTS} values per sample, got {extra.shape}")
    return head_input, extra, single


def _forward_cache(model, X, E):
    acts = [X]
    a = X
    nh = model.n_head_layers
    for i, (w, b, name) in enumerate(zip(model.weights, model.biases, model.activations)):
        if i == nh:
            a = np.concatenate([a, E], axis=1)
            acts[-1] = a
        a = _ACT[name][0](a @ w + b)
        acts.append(a)
    return acts


def forward(model: MlpModel, head_input, extra):
    """Predict (roll, pitch) at t+1. Accepts one sample or a batch (N, 8000) / (N, 2)."""
    X, E, single = _check_inputs(model, head_input, extra)
    out = _forward_cache(model, X, E)[-1]
    return out[0] if single else out


def loss_h(pred, target, H=None):
    """Quadratic form r^T H r of the residual r = pred - target."""
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(r @ _as_H(H) @ r)


def batch_loss(model, head_input, extra, target, H=None):
    """Mean loss_h over a batch."""
    pred = forward(model, np.atleast_2d(head_input), np.atleast_2d(extra))
    r = pred - np.atleast_2d(target)
    return float(np.mean(np.einsum("ni,ij,nj->n", r, _as_H(H), r)))


def gradients(model: MlpModel, batch, H=None):
    """Analytic gradient of the mean H-loss; returns ``(loss, dW list, db list)``.

    ``batch`` is ``(head_inputs, extras, targets)`` with leading batch axis.
    """
    head_input, extra, target = batch
    X, E, _ = _check_inputs(model, np.atleast_2d(head_input), np.atleast_2d(extra))
    T = np.atleast_2d(np.asarray(target, dtype=np.float64))
    n = X.shape[0]
    if n == 0:
        raise ShapeError("empty batch")
    if T.shape != (n, 2):
        raise ShapeError(f"targets must be (N, 2), got {T.shape}")
    Hm = _as_H(H)
    acts = _forward_cache(model, X, E)
    r = acts[-1] - T
    loss = float(np.mean(np.einsum("ni,ij,nj->n", r, Hm, r)))
    delta = (2.0 / n) * (r @ Hm)
    dW = [None] * model.n_layers
    db = [None] * model.n_layers
    nh = model.n_head_layers
    for i in range(model.n_layers - 1, -1, -1):
        out = acts[i + 1][:, :model.weights[i].shape[1]]  # drop appended extras at the junction
        delta = delta * _ACT[model.activations[i]][1](out)
        dW[i] = acts[i].T @ delta
        db[i] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ model.weights[i].T
        if i == nh:
            delta = delta[:, :-EXTRA_INPUTS]
    return loss, dW, db


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ParameterError("epochs", "must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size", "must be >= 1")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate", "must be positive")
        if not 0 <= self.momentum < 1:
            raise ParameterError("momentum", "must be in [0, 1)")
        return self


@dataclass
class LossCurves:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)


class ArrayData:
    """In-memory (head_inputs, extras, targets) triple usable wherever a Dataset is."""

    def __init__(self, head_inputs, extras, targets):
        self.head_inputs = np.asarray(head_inputs, dtype=np.float64)
        self.extras = np.asarray(extras, dtype=np.float64)
        self.targets = np.asarray(targets, dtype=np.float64)

    def __len__(self):
        return len(self.targets)

    def batch(self, idx, height_scale=1.0):
        return self.head_inputs[idx], self.extras[idx], self.targets[idx]


def _mean_loss(model, data, H, chunk=2048):
    n = len(data)
    if n == 0:
        return float("nan")
    total = 0.0
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        X, E, T = data.batch(idx, model.height_scale)
        r = forward(model, X, E) - T
        total += float(np.einsum("ni,ij,nj->", r, H, r))
    return total / n


def train(model: MlpModel, train_data, val_data=None, config: TrainConfig = TrainConfig(), H=None,
          log=None):
    """Mini-batch SGD with momentum from the model's current parameters.

    ``train_data`` / ``val_data`` expose ``__len__`` and ``batch(idx, height_scale)``
    (a :class:`~terrainplan.dataset.Dataset` or :class:`ArrayData`). Returns the
    trained copy and per-epoch mean losses, index 0 being the untrained model.
    """
    config.validate()
    if len(train_data) == 0:
        raise ValueError("empty training dataset")
    Hm = _as_H(H)
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    velocity = [np.zeros_like(p) for p in model.params()]
    curves = LossCurves([_mean_loss(model, train_data, Hm)],
                        [_mean_loss(model, val_data, Hm)] if val_data is not None else [])
    n = len(train_data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = np.sort(order[start:start + config.batch_size])
            _, dW, db = gradients(model, train_data.batch(idx, model.height_scale), Hm)
            grads = []
            for w_grad, b_grad in zip(dW, db):
                grads += [w_grad, b_grad]
            for p, v, g in zip(model.params(), velocity, grads):
                v *= config.momentum
                v -= config.learning_rate * g
                p += v
        curves.train.append(_mean_loss(model, train_data, Hm))
        if val_data is not None:
            curves.val.append(_mean_loss(model, val_data, Hm))
        if log is not None:
            log(epoch + 1, curves.train[-1], curves.val[-1] if val_data is not None else None)
    return model, curves


def _size_line(model):
    return (f"head={','.join(map(str, model.head_sizes))} tail={','.join(map(str, model.tail_sizes))} "
            f"activations={','.join(model.activations)} seed={model.rng_seed} "
            f"height_scale={float(model.height_scale)!r} params={model.n_params}")


def save_model(model: MlpModel, path):
    with open(path, "wb") as fh:
        fh.write(f"{VMLP_MAGIC}\n{_size_line(model)}\n".encode("ascii"))
        for p in model.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_model(path) -> MlpModel:
    from .terrain import read_magic

    with open(path, "rb") as fh:
        read_magic(fh, VMLP_MAGIC)
        line = fh.readline().decode("ascii", errors="replace")
        payload = fh.read()
    try:
        fields = dict(tok.split("=", 1) for tok in line.split())
        head = tuple(int(s) for s in fields["head"].split(","))
        tail = tuple(int(s) for s in fields["tail"].split(","))
        activations = tuple(fields["activations"].split(","))
        seed = int(fields["seed"])
        height_scale = float(fields["height_scale"])
        declared = int(fields["params"])
    except (KeyError, ValueError):
        raise HeaderError(f"bad VMLP size table {line!r}") from None
    try:
        model = MlpModel(head, tail, activations=activations, rng_seed=seed, height_scale=height_scale)
    except (ParameterError, ShapeError) as exc:
        raise SizeMismatchError(f"inconsistent size table: {exc}") from None
    if model.n_params != declared:
        raise SizeMismatchError(f"size table implies {model.n_params} parameters, header declares {declared}")
    need = declared * 8
    if len(payload) < need:
        raise TruncatedError(f"payload has {len(payload)} bytes, need {need}")
    if len(payload) > need:
        raise FormatError(f"{len(payload) - need} trailing bytes after VMLP payload")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    offset = 0
    for i, (a, b) in enumerate(model.layer_shapes):
        model.weights[i] = flat[offset:offset + a * b].reshape(a, b).copy()
        offset += a * b
        model.biases[i] = flat[offset:offset + b].copy()
        offset += b
    return model
