"""Command-line driver: gen-terrain, collect, train, evaluate, replay."""
from __future__ import annotations

import argparse
import csv
import glob
import logging
import math
import os
import sys

import numpy as np

from . import harness
from .dataset import collect, load_dataset, save_dataset
from .errors import FormatError, ParameterError
from .neuralnet import forward, load_model, save_model
from .oracle import load_episode_log
from .planner import load_plan_csv
from .terrain import load_map

log = logging.getLogger("terrainplan")


def _config(args):
    return harness.load_config(getattr(args, "config", None))


def cmd_gen_terrain(args):
    cfg = harness.load_config(args.spec)
    if args.tiers:
        cfg.tiers = {t: cfg.tiers[t] for t in args.tiers.split(",")}
    paths = harness.write_tier_maps(cfg, args.out, count=args.count, seed=args.seed)
    for path in paths:
        emap = load_map(path)
        print(f"{os.path.basename(path)}: {emap.cols}x{emap.rows} cells, max height {float(emap.heights.max()):.3f} m")
    return 0


def _histogram(values_deg, edges=(-30, -20, -10, -5, 0, 5, 10, 20, 30)):
    counts, _ = np.histogram(np.clip(values_deg, edges[0], edges[-1]), bins=edges)
    return " ".join(f"[{lo},{hi}):{c}" for lo, hi, c in zip(edges, edges[1:], counts))


def cmd_collect(args):
    cfg = _config(args)
    paths = sorted(glob.glob(os.path.join(args.maps, "*.emap")))
    if not paths:
        raise FileNotFoundError(f"no .emap files in {args.maps}")
    maps = [load_map(p) for p in paths]
    ds = collect(maps, cfg.vehicle, args.frames, dt=cfg.collect.dt, seed=args.seed,
                 slip_noise_std=cfg.episode.slip_noise_std, episode_steps=cfg.collect.episode_steps)
    save_dataset(ds, args.out)
    roll = np.degrees(ds.states_t1[:, 3])
    pitch = np.degrees(ds.states_t1[:, 4])
    print(f"{len(ds)} frames from {len(maps)} maps -> {args.out}")
    print(f"roll  deg: mean {roll.mean():.2f} std {roll.std():.2f} | {_histogram(roll)}")
    print(f"pitch deg: mean {pitch.mean():.2f} std {pitch.std():.2f} | {_histogram(pitch)}")
    return 0


def _rmse_deg(model, data):
    X, E, T = data.batch(np.arange(len(data)), model.height_scale)
    return np.degrees(np.sqrt(np.mean((forward(model, X, E) - T) ** 2, axis=0)))


def cmd_train(args):
    cfg = _config(args)
    ds = load_dataset(args.data)
    if len(ds) < 2:
        raise ParameterError("data", "need at least two frames to train")
    model, curves, _, va = harness.train_model(cfg, ds, seed=args.seed)
    save_model(model, args.out)
    curve_path = os.path.splitext(args.out)[0] + ".losses.csv"
    with open(curve_path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for k, (a, b) in enumerate(zip(curves.train, curves.val)):
            w.writerow([k, repr(a), repr(b)])
    roll, pitch = _rmse_deg(model, va)
    print(f"model -> {args.out}, losses -> {curve_path}")
    print(f"validation RMSE: roll {roll:.3f} deg, pitch {pitch:.3f} deg")
    return 0


def cmd_evaluate(args):
    cfg = _config(args)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.seed = args.seed
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in harness.METHODS:
            raise ParameterError("methods", f"unknown method {m!r}")
    model = None
    if any(m != "open_loop" for m in methods):
        if not args.model or not os.path.exists(args.model):
            raise FileNotFoundError(f"model file {args.model!r} is required for {','.join(methods)}")
        model = load_model(args.model)
    if args.maps:
        maps = harness.read_tier_maps(args.maps, cfg.tiers)
        if not maps:
            raise FileNotFoundError(f"no <tier>_<k>.emap files in {args.maps}")
        maps = {t: m[:cfg.trials] for t, m in maps.items()}
    else:
        maps = {t: harness.tier_maps(cfg, t) for t in cfg.tiers}
    os.makedirs(args.out, exist_ok=True)
    report = harness.evaluate(cfg, maps, model, methods, args.out, save_plans=args.save_plans)
    sys.stdout.write(report.table())
    return 0


def cmd_replay(args):
    result = load_episode_log(args.log)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "attitude_deg.csv"), "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "roll_deg", "pitch_deg"])
        for s in result.trajectory:
            w.writerow([repr(s.t * result.dt), repr(math.degrees(s.roll)), repr(math.degrees(s.pitch))])
    stem = os.path.splitext(args.log)[0]
    plans = sorted(glob.glob(stem + ".plan*.csv"))
    with open(os.path.join(args.out, "topview.csv"), "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "index", "x", "y"])
        for k, s in enumerate(result.trajectory):
            w.writerow(["trajectory", k, repr(s.x), repr(s.y)])
        for j, path in enumerate(plans):
            for k, row in enumerate(load_plan_csv(path)):
                w.writerow([f"plan{j:03d}", k, repr(row["x"]), repr(row["y"])])
    print(f"{len(result.trajectory)} states, {len(plans)} plan overlays, outcome {result.outcome.value} -> {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="terrainplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    p.add_argument("--config", help="INI experiment configuration (defaults are built in)")
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("gen-terrain", help="write <tier>_<k>.emap benchmark maps")
    g.add_argument("--spec", help="INI configuration holding the tier terrain specs")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, help="maps per tier (default: trials)")
    g.add_argument("--seed", type=int, help="terrain seed (default: experiment seed)")
    g.add_argument("--tiers", help="comma-separated subset of tiers")
    g.set_defaults(func=cmd_gen_terrain)

    c = sub.add_parser("collect", help="drive the simulator and record training frames")
    c.add_argument("--maps", required=True)
    c.add_argument("--frames", type=int, default=harness.CollectConfig.frames)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_collect)

    t = sub.add_parser("train", help="fit the attitude model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="paired benchmark over tiers and methods")
    e.add_argument("--maps", help="directory of <tier>_<k>.emap files (default: generate from the config)")
    e.add_argument("--model")
    e.add_argument("--methods", default=",".join(harness.METHODS))
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", required=True)
    e.add_argument("--save-plans", action="store_true", help="dump every planner output next to the episode logs")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("replay", help="emit plot-ready CSV series from an episode log")
    r.add_argument("--log", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_replay)

    # sub-command level --config so it can follow the command name too
    for sp in (c, t, e):
        sp.add_argument("--config", default=argparse.SUPPRESS)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_config:
        sys.stdout.write(harness.config_to_ini(_config(args)))
        return 0
    if not getattr(args, "func", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (OSError, FormatError, ParameterError) as exc:
        print(f"terrainplan: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
