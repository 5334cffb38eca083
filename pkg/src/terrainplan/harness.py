"""Experiment configuration, paired benchmark runs, and report aggregation."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerConfig
from .dataset import collect, split
from .dynamics import DynamicsConfig
from .errors import ParameterError
from .neuralnet import TrainConfig, init_model, train
from .oracle import EpisodeResult, run_episode, save_episode_log
from .planner import CostWeights, GoalSpec, PlannerConfig, save_plan_csv
from .policies import GreedyPolicy, OpenLoopPolicy, PlannerPolicy
from .state import VehicleState
from .terrain import TerrainGenSpec, generate_rock_field, load_map, save_map
from .vehicle import geometry_preset

log = logging.getLogger(__name__)

METHODS = ("wmvct", "open_loop", "greedy")
TIER_ORDER = ("easy", "medium", "difficult")


def _tier(max_height, rock_count):
    return TerrainGenSpec(max_height=max_height, rock_count=rock_count, rock_radius_mean=0.25,
                          rock_radius_std=0.04, clear_ends=0.75)


DEFAULT_TIERS = {
    "easy": _tier(0.25, 6),
    "medium": _tier(0.4, 8),
    "difficult": _tier(0.6, 10),
}


@dataclass(frozen=True)
class EpisodeConfig:
    start_x: float = 0.4
    start_y: float = 0.65
    start_yaw: float = 0.0
    goal_x: float = 2.6
    goal_y: float = 0.65
    goal_radius: float = 0.25
    dt: float = 0.5
    max_steps: int = 120
    slip_noise_std: float = 0.05

    @property
    def start(self):
        return VehicleState(self.start_x, self.start_y, yaw=self.start_yaw)

    @property
    def goal(self):
        return GoalSpec(self.goal_x, self.goal_y, self.goal_radius)


@dataclass(frozen=True)
class CollectConfig:
    frames: int = 20000
    tier: str = "medium"
    maps: int = 12
    dt: float = 1.0
    episode_steps: int = 40
    val_fraction: float = 0.2


@dataclass
class ExperimentConfig:
    geometry: str = "v6w"
    trials: int = 5
    seed: int = 0
    tiers: dict = field(default_factory=lambda: dict(DEFAULT_TIERS))
    episode: EpisodeConfig = EpisodeConfig()
    planner: PlannerConfig = PlannerConfig()
    weights: CostWeights = CostWeights()
    controller: ControllerConfig = ControllerConfig()
    collect: CollectConfig = CollectConfig()
    train: TrainConfig = TrainConfig(learning_rate=1e-2)

    def __post_init__(self):
        if not self.tiers:
            raise ParameterError("tiers", "need at least one difficulty tier")
        if self.trials < 1:
            raise ParameterError("trials", "must be >= 1")
        geometry_preset(self.geometry)
        for spec in self.tiers.values():
            spec.validate()

    @property
    def vehicle(self):
        return geometry_preset(self.geometry)

    def dynamics(self, model=None):
        # the model is trained on transitions at the collection step, so plan at that step too
        return DynamicsConfig(model=model, dt=self.collect.dt, geometry=self.geometry)


# ---------------------------------------------------------------------------
# INI round trip

_SECTIONS = ("episode", "planner", "weights", "controller", "collect", "train")


def _coerce(kind, text):
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _fields(obj):
    return [(f.name, getattr(obj, f.name)) for f in dataclasses.fields(obj)]


def config_to_ini(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["experiment"] = {"geometry": cfg.geometry, "trials": str(cfg.trials), "seed": str(cfg.seed),
                        "tiers": ",".join(cfg.tiers)}
    for name, spec in cfg.tiers.items():
        cp[f"tier.{name}"] = {k: repr(v) if isinstance(v, float) else str(v)
                              for k, v in _fields(spec) if k != "seed"}
    for section in _SECTIONS:
        cp[section] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in _fields(getattr(cfg, section))}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _section(cp, name, default):
    if not cp.has_section(name):
        return default
    known = {f.name: type(getattr(default, f.name)) for f in dataclasses.fields(default)}
    values = {}
    for key, text in cp[name].items():
        if key not in known:
            raise ParameterError(f"{name}.{key}", "unknown config key")
        try:
            values[key] = _coerce(known[key], text)
        except ValueError:
            raise ParameterError(f"{name}.{key}", f"cannot parse {text!r}") from None
    return dataclasses.replace(default, **values)


def config_from_ini(text) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    base = ExperimentConfig()
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    names = [t.strip() for t in exp.get("tiers", ",".join(base.tiers)).split(",") if t.strip()]
    tiers = {}
    for name in names:
        default = DEFAULT_TIERS.get(name, TerrainGenSpec())
        tiers[name] = _section(cp, f"tier.{name}", default)
    sections = {s: _section(cp, s, getattr(base, s)) for s in _SECTIONS}
    return ExperimentConfig(geometry=exp.get("geometry", base.geometry), trials=int(exp.get("trials", base.trials)),
                            seed=int(exp.get("seed", base.seed)), tiers=tiers, **sections)


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path, encoding="utf-8") as fh:
        return config_from_ini(fh.read())


# ---------------------------------------------------------------------------
# terrain and model preparation


def map_seed(seed, tier_index, trial):
    """Terrain seed of one benchmark trial; distinct per (seed, tier, trial)."""
    return int(np.random.SeedSequence([seed, tier_index, trial]).generate_state(1)[0])


def tier_maps(cfg: ExperimentConfig, tier, count=None, seed=None):
    idx = list(cfg.tiers).index(tier)
    spec = cfg.tiers[tier]
    seed = cfg.seed if seed is None else seed
    return [generate_rock_field(dataclasses.replace(spec, seed=map_seed(seed, idx, k)))
            for k in range(cfg.trials if count is None else count)]


def write_tier_maps(cfg: ExperimentConfig, out_dir, count=None, seed=None):
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for tier in cfg.tiers:
        for k, emap in enumerate(tier_maps(cfg, tier, count, seed)):
            path = os.path.join(out_dir, f"{tier}_{k}.emap")
            save_map(emap, path)
            paths.append(path)
    return paths


def read_tier_maps(map_dir, tiers):
    """``{tier: [maps in trial order]}`` from ``<tier>_<k>.emap`` files."""
    found = {}
    for tier in tiers:
        k = 0
        maps = []
        while os.path.exists(os.path.join(map_dir, f"{tier}_{k}.emap")):
            maps.append(load_map(os.path.join(map_dir, f"{tier}_{k}.emap")))
            k += 1
        if maps:
            found[tier] = maps
    return found


def training_maps(cfg: ExperimentConfig, seed=None):
    """Collection terrains: the configured tier, seeded apart from any benchmark map."""
    c = cfg.collect
    if c.tier not in cfg.tiers:
        raise ParameterError("collect.tier", f"unknown tier {c.tier!r}")
    seed = cfg.seed if seed is None else seed
    spec = cfg.tiers[c.tier]
    return [generate_rock_field(dataclasses.replace(spec, seed=map_seed(seed, 1000, k))) for k in range(c.maps)]


def train_model(cfg: ExperimentConfig, dataset, seed=None):
    """Split, fit, and return ``(model, curves, train_set, val_set)``."""
    seed = cfg.train.seed if seed is None else seed
    tr, va = split(dataset, 1.0 - cfg.collect.val_fraction, seed)
    model = init_model(seed, height_scale=tr.norm_stats.height_scale)
    model, curves = train(model, tr, va, dataclasses.replace(cfg.train, seed=seed),
                          log=lambda e, a, b: log.info("epoch %d train %.6f val %.6f", e, a, b))
    return model, curves, tr, va


def build_model(cfg: ExperimentConfig, seed=None):
    seed = cfg.seed if seed is None else seed
    ds = collect(training_maps(cfg, seed), cfg.vehicle, cfg.collect.frames, dt=cfg.collect.dt, seed=seed,
                 slip_noise_std=cfg.episode.slip_noise_std, episode_steps=cfg.collect.episode_steps)
    return train_model(cfg, ds, seed)[0]


# ---------------------------------------------------------------------------
# benchmark


def make_policy(method, cfg: ExperimentConfig, emap, model, keep_plans=False):
    goal = cfg.episode.goal
    if method == "open_loop":
        return OpenLoopPolicy(goal, v=cfg.planner.v_const, omega_limit=cfg.controller.omega_limit)
    if model is None:
        raise ParameterError("model", f"method {method!r} needs a trained model")
    if method == "wmvct":
        return PlannerPolicy(emap, goal, cfg.dynamics(model), cfg.episode.dt, cfg.weights, cfg.planner,
                             cfg.controller, keep_plans=keep_plans)
    if method == "greedy":
        return GreedyPolicy(emap, goal, cfg.dynamics(model), cfg.weights, cfg.planner)
    raise ParameterError("method", f"unknown method {method!r}")


def run_trial(method, cfg: ExperimentConfig, emap, model, episode_seed, keep_plans=False):
    policy = make_policy(method, cfg, emap, model, keep_plans)
    e = cfg.episode
    result = run_episode(emap, e.start, (e.goal_x, e.goal_y), e.goal_radius, policy, cfg.vehicle,
                         dt=e.dt, max_steps=e.max_steps, seed=episode_seed, slip_noise_std=e.slip_noise_std)
    return result, policy


TRIAL_FIELDS = ("tier", "method", "trial", "episode_seed", "outcome", "success", "steps",
                "traversal_time", "mean_abs_roll_deg", "mean_abs_pitch_deg")
SUMMARY_FIELDS = ("tier", "method", "trials", "success_count", "mean_traversal_time",
                  "mean_abs_roll_deg", "mean_abs_pitch_deg")


@dataclass(frozen=True)
class TrialRow:
    tier: str
    method: str
    trial: int
    episode_seed: int
    outcome: str
    success: bool
    steps: int
    traversal_time: float
    mean_abs_roll_deg: float
    mean_abs_pitch_deg: float

    @classmethod
    def from_result(cls, tier, method, trial, episode_seed, result: EpisodeResult):
        return cls(tier, method, trial, episode_seed, result.outcome.value, result.success,
                   len(result.inputs), result.traversal_time, math.degrees(result.mean_abs_roll),
                   math.degrees(result.mean_abs_pitch))


@dataclass(frozen=True)
class SummaryRow:
    tier: str
    method: str
    trials: int
    success_count: int
    mean_traversal_time: float  # over successful trials; nan if none
    mean_abs_roll_deg: float  # over all trials
    mean_abs_pitch_deg: float


class BenchmarkReport:
    """Per-trial rows plus the (tier, method) aggregation derived from them."""

    def __init__(self, rows=()):
        self.rows = list(rows)

    def add(self, row: TrialRow):
        self.rows.append(row)

    def _keys(self):
        keys = []
        for r in self.rows:
            if (r.tier, r.method) not in keys:
                keys.append((r.tier, r.method))
        return keys

    def summary(self):
        out = []
        for tier, method in self._keys():
            rows = [r for r in self.rows if r.tier == tier and r.method == method]
            times = [r.traversal_time for r in rows if r.success]
            out.append(SummaryRow(tier, method, len(rows), len(times),
                                  float(np.mean(times)) if times else float("nan"),
                                  float(np.mean([r.mean_abs_roll_deg for r in rows])),
                                  float(np.mean([r.mean_abs_pitch_deg for r in rows]))))
        return out

    def totals(self, method):
        rows = [r for r in self.rows if r.method == method]
        if not rows:
            return None
        return {"success_count": sum(r.success for r in rows), "trials": len(rows),
                "mean_abs_roll_deg": float(np.mean([r.mean_abs_roll_deg for r in rows])),
                "mean_abs_pitch_deg": float(np.mean([r.mean_abs_pitch_deg for r in rows]))}

    def write_trials(self, path):
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRIAL_FIELDS)
            for r in self.rows:
                w.writerow([_cell(getattr(r, f)) for f in TRIAL_FIELDS])

    def write_summary(self, path):
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_FIELDS)
            for r in self.summary():
                w.writerow([_cell(getattr(r, f)) for f in SUMMARY_FIELDS])

    def table(self):
        lines = ["# roll/pitch means over all trials; traversal time over successful trials only",
                 f"{'tier':<10} {'method':<10} {'success':>8} {'time_s':>8} {'|roll|deg':>10} {'|pitch|deg':>11}"]
        for r in self.summary():
            t = "-" if math.isnan(r.mean_traversal_time) else f"{r.mean_traversal_time:.1f}"
            lines.append(f"{r.tier:<10} {r.method:<10} {f'{r.success_count}/{r.trials}':>8} {t:>8} "
                         f"{r.mean_abs_roll_deg:>10.2f} {r.mean_abs_pitch_deg:>11.2f}")
        return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_trials(path) -> BenchmarkReport:
    with open(path, newline="", encoding="ascii") as fh:
        rows = []
        for d in csv.DictReader(fh):
            rows.append(TrialRow(d["tier"], d["method"], int(d["trial"]), int(d["episode_seed"]), d["outcome"],
                                 d["success"] == "1", int(d["steps"]), float(d["traversal_time"]),
                                 float(d["mean_abs_roll_deg"]), float(d["mean_abs_pitch_deg"])))
    return BenchmarkReport(rows)


def episode_seed(seed, tier_index, trial):
    return map_seed(seed, 2000 + tier_index, trial)


def evaluate(cfg: ExperimentConfig, maps_by_tier, model, methods=METHODS, out_dir=None, save_plans=False):
    """Run every (tier, method, trial); methods share maps and episode seeds per trial."""
    report = BenchmarkReport()
    for ti, tier in enumerate(maps_by_tier):
        for method in methods:
            for k, emap in enumerate(maps_by_tier[tier]):
                seed = episode_seed(cfg.seed, ti, k)
                result, policy = run_trial(method, cfg, emap, model, seed, keep_plans=save_plans)
                report.add(TrialRow.from_result(tier, method, k, seed, result))
                log.info("%s %s trial %d: %s in %d steps", tier, method, k, result.outcome.value, len(result.inputs))
                if out_dir is not None:
                    stem = os.path.join(out_dir, "episodes", f"{tier}_{method}_{k}")
                    os.makedirs(os.path.dirname(stem), exist_ok=True)
                    save_episode_log(result, stem + ".eplog")
                    if save_plans and method == "wmvct":
                        for j, p in enumerate(policy.plans):
                            save_plan_csv(p, f"{stem}.plan{j:03d}.csv", cfg.episode.goal, cfg.weights)
    if out_dir is not None:
        report.write_trials(os.path.join(out_dir, "trials.csv"))
        report.write_summary(os.path.join(out_dir, "summary.csv"))
        with open(os.path.join(out_dir, "summary.txt"), "w", encoding="ascii") as fh:
            fh.write(report.table())
    return report
