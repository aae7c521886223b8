"""Command-line entry point.

Subcommands: train, eval, benchmark, track, scale, plots. Every run is
driven by a flat key-value config file plus repeatable --set overrides; the
output root can be redirected with the SHEPHERDING_OUT environment variable.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config
from .harness import check_thresholds, export_plots, resolve_out_dir, run_batch, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shepherding",
        description="Train, evaluate, and benchmark shepherding controllers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="config file (flat key = value lines)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--out", help="output directory (overrides out_dir)")

    def add_eval_flags(p):
        p.add_argument("--episodes", type=int, help="number of seeded episodes")
        p.add_argument("--seed-base", type=int, help="first episode seed")
        p.add_argument("--workers", type=int, help="parallel episode workers")
        p.add_argument("--save-trajectories", action="store_true",
                       help="write one trajectory CSV per episode")
        p.add_argument("--assert", dest="assert_thresholds", action="store_true",
                       help="exit nonzero unless the scenario thresholds hold")

    for name, scenario in (("eval", None), ("benchmark", "benchmark"),
                           ("track", "track"), ("scale", "scale-5v50")):
        p = sub.add_parser(name, help=f"run the {scenario or 'configured'} scenario")
        add_common(p)
        add_eval_flags(p)
        p.set_defaults(scenario=scenario)

    p = sub.add_parser("train", help="train a policy and persist weights")
    add_common(p)
    p.add_argument("--algorithm", choices=("dqn", "ppo", "mappo", "dqn-select"))
    p.add_argument("--preset", choices=("desk", "paper"))
    p.add_argument("--episodes", type=int, help="override the episode budget")
    p.add_argument("--seed", type=int, help="training seed")
    p.add_argument("--resume", action="store_true",
                   help="continue from existing weights in the output dir")

    p = sub.add_parser("plots", help="export plot data + script for a batch")
    p.add_argument("batch_dir", help="directory containing summary CSVs")
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for item in args.overrides:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, _, val = item.partition("=")
        cfg.set(key.strip(), val.strip())
    if args.out:
        cfg.set("out_dir", args.out)
    if getattr(args, "scenario", None):
        cfg.set("scenario", args.scenario)
    for attr, key in (("episodes", "episodes"), ("seed_base", "seed_base"),
                      ("workers", "workers")):
        if getattr(args, attr, None) is not None:
            cfg.set(key, getattr(args, attr))
    if getattr(args, "save_trajectories", False):
        cfg.set("save_trajectories", True)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "plots":
        plots = export_plots(args.batch_dir)
        print(f"plot data and script written to {plots}")
        return 0

    if args.command == "train":
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        for item in args.overrides:
            key, _, val = item.partition("=")
            cfg.set(key.strip(), val.strip())
        if args.out:
            cfg.set("out_dir", args.out)
        if args.algorithm:
            cfg.set("train.algorithm", args.algorithm)
        if args.preset:
            cfg.set("train.preset", args.preset)
        if args.episodes is not None:
            cfg.set("train.episodes", args.episodes)
        if args.seed is not None:
            cfg.set("train.seed", args.seed)
        if args.resume:
            cfg.set("train.resume", True)
        result = train(cfg)
        print(f"trained {cfg['train.algorithm']} for "
              f"{result['episodes_trained']} episodes")
        print(f"weights: {result['weights']}")
        print(f"curve:   {result['curve']}")
        return 0

    cfg = config_from_args(args)
    results = run_batch(cfg)
    for stack, res in results.items():
        rows = res["rows"]
        succ = sum(r["success"] for r in rows) / len(rows)
        print(f"{stack}: {len(rows)} episodes, success rate {succ:.3f} "
              f"-> {res['summary']}")
    print(f"outputs in {resolve_out_dir(cfg)}")

    if getattr(args, "assert_thresholds", False):
        failures = check_thresholds(cfg, results)
        for msg in failures:
            print(f"THRESHOLD FAILED: {msg}", file=sys.stderr)
        if failures:
            return 1
        print("all thresholds satisfied")
    return 0


if __name__ == "__main__":
    sys.exit(main())
