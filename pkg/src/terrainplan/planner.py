"""Sampling-based receding-horizon planner over the learned forward model.

Each stage rolls out every sampled (v, omega) pair held constant for
``stage_steps`` steps from the current anchor, scores prefix + candidate with
the five-term cost, commits the first ``commit_steps`` steps of the cheapest
candidate, and re-anchors at the committed endpoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsConfig, rollout_arrays
from .errors import ParameterError
from .state import ControlInput, VehicleState

TERMS = ("c_ro", "c_im", "c_hc", "c_mb", "c_est")


@dataclass(frozen=True)
class CostWeights:
    w1: float = 1.0
    w2: float = 8.0
    w3: float = 0.07
    w4: float = 10.0
    w5: float = 4.0
    w11: float = 0.4
    w12: float = 0.4
    w21: float = 1.0
    w22: float = 1.0

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4", "w5", "w11", "w12", "w21", "w22"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ParameterError(name, "cost weights must be finite and >= 0")

    @property
    def term_weights(self):
        return np.array([self.w1, self.w2, self.w3, self.w4, self.w5])


@dataclass(frozen=True)
class PlannerConfig:
    v_const: float = 0.2
    omega_count: int = 11
    omega_range: float = 0.78
    stage_steps: int = 5
    stages: int = 5
    commit_steps: int = 3
    replan_hz: float = 2.0
    deviation_threshold: float = 0.4

    def __post_init__(self):
        if self.omega_count < 3 or self.omega_count % 2 == 0:
            raise ParameterError("omega_count", "must be odd and >= 3 so that omega = 0 is sampled")
        if not 1 <= self.commit_steps <= self.stage_steps:
            raise ParameterError("commit_steps", "must lie in [1, stage_steps]")
        if self.stages < 1:
            raise ParameterError("stages", "must be >= 1")
        if not self.omega_range > 0:
            raise ParameterError("omega_range", "must be positive")
        if not self.replan_hz > 0:
            raise ParameterError("replan_hz", "must be positive")

    @property
    def horizon(self):
        return self.stages * self.commit_steps


@dataclass(frozen=True)
class GoalSpec:
    x: float
    y: float
    radius: float = 0.25

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError("radius", "goal radius must be positive")

    @property
    def xy(self):
        return (self.x, self.y)


@dataclass
class Candidate:
    stage: int
    omega: float
    states: np.ndarray  # (stage_steps + 1, 6), first row is the anchor
    off_map: np.ndarray
    cost: float
    per_term: np.ndarray
    selected: bool = False


@dataclass
class Plan:
    states: list
    inputs: list
    total_cost: float
    per_term_costs: tuple
    created_t: int = 0
    failed: bool = False
    candidates: list = field(default_factory=list, repr=False)

    @property
    def n_evaluated(self):
        return len(self.candidates)


def sample_actions(config: PlannerConfig = PlannerConfig()):
    """``omega_count`` inputs at constant speed, omega evenly spaced and symmetric about 0."""
    m = config.omega_count // 2
    return [ControlInput(config.v_const, config.omega_range * (k - m) / m) for k in range(config.omega_count)]


# ---------------------------------------------------------------------------
# cost terms; array forms take (..., T) arrays with the time axis last


def _arr(states, attr):
    return np.array([getattr(s, attr) for s in states], dtype=np.float64)


def rollover_terms(roll, pitch, weights):
    return weights.w11 * np.abs(roll).sum(axis=-1) + weights.w12 * np.abs(pitch).sum(axis=-1)


def immobilization_terms(x, y, weights):
    return (-weights.w21 * np.abs(np.diff(x, axis=-1)).sum(axis=-1)
            - weights.w22 * np.abs(np.diff(y, axis=-1)).sum(axis=-1))


def height_change_terms(z):
    return np.abs(np.diff(z, axis=-1)).sum(axis=-1)


def cost_rollover(states, weights: CostWeights = CostWeights()):
    return float(rollover_terms(_arr(states, "roll"), _arr(states, "pitch"), weights))


def cost_immobilization(states, weights: CostWeights = CostWeights()):
    return float(immobilization_terms(_arr(states, "x"), _arr(states, "y"), weights))


def cost_height_change(states):
    return float(height_change_terms(_arr(states, "z")))


def cost_map_boundary(states):
    return float(sum(1 for s in states if s.off_map))


def cost_goal_estimate(final_state, goal):
    gx, gy = goal.xy if isinstance(goal, GoalSpec) else goal
    return math.hypot(final_state.x - gx, final_state.y - gy)


def cost_terms_arrays(S, off_map, goal, weights):
    """Per-term costs for trajectories ``S`` (..., T, 6) -> (..., 5)."""
    x, y, z, roll, pitch = (S[..., i] for i in range(5))
    gx, gy = goal.xy if isinstance(goal, GoalSpec) else goal
    return np.stack([
        rollover_terms(roll, pitch, weights),
        immobilization_terms(x, y, weights),
        height_change_terms(z),
        off_map.sum(axis=-1).astype(np.float64),
        np.hypot(x[..., -1] - gx, y[..., -1] - gy),
    ], axis=-1)


def evaluate_cost(states, goal, weights: CostWeights = CostWeights()):
    """Weighted five-term cost; returns ``(total, (c_ro, c_im, c_hc, c_mb, c_est))``."""
    terms = (cost_rollover(states, weights), cost_immobilization(states, weights),
             cost_height_change(states), cost_map_boundary(states), cost_goal_estimate(states[-1], goal))
    total = (weights.w1 * terms[0] + weights.w2 * terms[1] + weights.w3 * terms[2]
             + weights.w4 * terms[3] + weights.w5 * terms[4])
    return total, terms


def _weighted(terms, weights):
    w = weights.term_weights
    return (w[0] * terms[..., 0] + w[1] * terms[..., 1] + w[2] * terms[..., 2]
            + w[3] * terms[..., 3] + w[4] * terms[..., 4])


def _select(costs, omegas):
    """Index of the cheapest candidate; ties go to smaller |omega|, then negative omega."""
    best = min(range(len(costs)), key=lambda i: (costs[i], abs(omegas[i]), omegas[i]))
    return best


def plan(state: VehicleState, emap, goal, model=None, weights: CostWeights = CostWeights(),
         config: PlannerConfig = PlannerConfig(), dynamics: DynamicsConfig = None) -> Plan:
    """Staged tree expansion to horizon ``stages * commit_steps``.

    Every stage evaluates all sampled actions (``stages * omega_count``
    candidates in total). ``Plan.failed`` is set when every candidate of some
    stage leaves the map on all of its new states.
    """
    if dynamics is None:
        dynamics = DynamicsConfig(model=model)
    elif model is not None:
        dynamics = DynamicsConfig(model=model, dt=dynamics.dt, omega_epsilon=dynamics.omega_epsilon,
                                  geometry=dynamics.geometry)
    actions = sample_actions(config)
    omegas = np.array([a.omega for a in actions])
    prefix = np.array([state.as_tuple()], dtype=np.float64)
    prefix_off = np.array([state.off_map])
    chosen = []
    candidates = []
    failed = False
    for stage in range(config.stages):
        S, off = rollout_arrays(prefix[-1], config.v_const, omegas, config.stage_steps, emap, dynamics)
        n = len(omegas)
        full = np.concatenate([np.broadcast_to(prefix, (n,) + prefix.shape), S[:, 1:]], axis=1)
        full_off = np.concatenate([np.broadcast_to(prefix_off, (n,) + prefix_off.shape), off[:, 1:]], axis=1)
        terms = cost_terms_arrays(full, full_off, goal, weights)
        costs = _weighted(terms, weights)
        best = _select(costs.tolist(), omegas.tolist())
        if off[:, 1:].all():
            failed = True
        for i in range(n):
            candidates.append(Candidate(stage, float(omegas[i]), S[i], off[i], float(costs[i]), terms[i], i == best))
        prefix = np.concatenate([prefix, S[best, 1:config.commit_steps + 1]])
        prefix_off = np.concatenate([prefix_off, off[best, 1:config.commit_steps + 1]])
        chosen += [actions[best]] * config.commit_steps
    states = [VehicleState(*(float(v) for v in row), state.t + k, bool(f))
              for k, (row, f) in enumerate(zip(prefix, prefix_off))]
    states[0] = state
    terms = cost_terms_arrays(prefix, prefix_off, goal, weights)
    total = float(_weighted(terms, weights))
    return Plan(states, chosen, total, tuple(float(t) for t in terms), state.t, failed, candidates)


def _point_segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    s = 0.0 if L2 == 0 else min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - (ax + s * dx), py - (ay + s * dy))


def distance_to_plan(state: VehicleState, plan_: Plan):
    pts = [(s.x, s.y) for s in plan_.states]
    if len(pts) == 1:
        return math.hypot(state.x - pts[0][0], state.y - pts[0][1])
    return min(_point_segment_distance(state.x, state.y, *a, *b) for a, b in zip(pts, pts[1:]))


def should_replan(current_state: VehicleState, plan_: Plan, elapsed_since_plan,
                  config: PlannerConfig = PlannerConfig()):
    if elapsed_since_plan >= 1.0 / config.replan_hz:
        return True
    return distance_to_plan(current_state, plan_) > config.deviation_threshold


PLAN_HEADER = "t,x,y,z,roll,pitch,yaw,v,omega,cost_total"


def save_plan_csv(plan_: Plan, path, goal, weights: CostWeights = CostWeights()):
    """Plan dump; ``cost_total`` on row k is the cost of the plan prefix up to state k."""
    lines = [PLAN_HEADER,
             "# per_term: " + ",".join(f"{n}={v!r}" for n, v in zip(TERMS, plan_.per_term_costs))
             + f",total={plan_.total_cost!r}"]
    for k, s in enumerate(plan_.states):
        prefix_cost, _ = evaluate_cost(plan_.states[:k + 1], goal, weights)
        if k < len(plan_.inputs):
            u = f"{plan_.inputs[k].v!r},{plan_.inputs[k].omega!r}"
        else:
            u = ","
        lines.append(f"{s.t},{s.x!r},{s.y!r},{s.z!r},{s.roll!r},{s.pitch!r},{s.yaw!r},{u},{prefix_cost!r}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_plan_csv(path):
    """Read a plan dump back as a list of row dicts (floats; empty v/omega become None)."""
    rows = []
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            vals = line.strip().split(",")
            rows.append({k: (float(v) if v != "" else None) for k, v in zip(header, vals)})
    return rows
