"""The ``perfpred`` command line.

Subcommands: gen-data, run, sweep, check, aggregate.  Exit code 0 on
success, 1 when a requested check fails or a run diverges, 2 on config or
usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import io, runner
from .config import ConfigError, parse_config


def _load(args) -> "ExperimentConfig":
    cfg = parse_config(args.config)
    if getattr(args, "seed_override", None) is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed_override,))
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


def _cmd_gen_data(args) -> int:
    cfg = _load(args)
    written = runner.gen_data(cfg, cfg.out_dir)
    for path in written:
        print(path)
    return 0


def _cmd_run(args) -> int:
    cfg = _load(args)
    grid = cfg.grid()
    if len(grid) != 1:
        print(
            f"run: config resolves to {len(grid)} runs "
            "(use a single plan/eps/seed, --seed-override, or `sweep`)",
            file=sys.stderr,
        )
        return 2
    plan, eps, seed = grid[0]
    os.makedirs(os.path.join(cfg.out_dir, "runs"), exist_ok=True)
    rid = runner.run_id(plan, eps, seed)
    traj = runner.run_one(cfg, plan, eps, seed)
    path = os.path.join(cfg.out_dir, "runs", f"{rid}.csv")
    io.write_trajectory_csv(path, rid, traj)
    print(path)
    if traj.status != "ok":
        print(f"run {rid}: {traj.status}: {traj.note}", file=sys.stderr)
        return 1
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    manifest = runner.sweep(cfg, cfg.out_dir, jobs=args.jobs)
    n_runs = len(manifest["runs"])
    n_div = manifest["n_diverged"]
    print(f"sweep: {n_runs} runs, {n_div} diverged -> {cfg.out_dir}")
    return 1 if n_div else 0


def _cmd_check(args) -> int:
    cfg = _load(args)
    outcomes = runner.run_checks(cfg, cfg.out_dir)
    bad = 0
    for oc in outcomes:
        if oc.skipped:
            print(f"check {oc.name}: skipped ({oc.skipped})")
        else:
            verdict = "ok" if oc.ok else "FAILED"
            print(f"check {oc.name}: {oc.total - oc.failed}/{oc.total} {verdict}")
            bad += not oc.ok
    return 1 if bad else 0


def _cmd_aggregate(args) -> int:
    expected = None
    if args.config is not None:
        expected = parse_config(args.config).config_hash()
    if args.out is None:
        print("aggregate: --out is required", file=sys.stderr)
        return 2
    manifest = runner.aggregate_existing(args.out, expected)
    print(f"aggregate: {len(manifest['aggregates'])} groups -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfpred",
        description=(
            "Stochastic optimization under decision-dependent data: "
            "config-driven runs, sweeps, and diagnostics."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument(
            "--config", required=config_required, help="flat key=value config file"
        )
        p.add_argument("--out", default=None, help="output directory (overrides out.dir)")

    p = sub.add_parser("gen-data", help="materialize the synthetic dataset as CSVs")
    common(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("run", help="execute a single run")
    common(p)
    p.add_argument("--seed-override", type=int, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run the full plan x eps x seed grid")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--seed-override", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("check", help="gradient/sensitivity/descent diagnostics")
    common(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("aggregate", help="rebuild aggregates from per-run CSVs")
    common(p, config_required=False)
    p.set_defaults(func=_cmd_aggregate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"perfpred {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
