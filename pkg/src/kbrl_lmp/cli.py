"""Command-line entry point: ``run``, ``baseline``, ``report`` and ``check``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import checks
from .harness import (
    PRESETS,
    RunConfig,
    emit_outputs,
    plot_deviation,
    preset_config,
    run_baseline_sweep,
    run_experiment,
    write_baselines_csv,
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="RunConfig JSON file")
    src.add_argument("--preset", choices=PRESETS, default=None, help="named configuration (default: desk)")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for replications")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg = replace(cfg, scenario=replace(cfg.scenario, seed=args.seed))
    else:
        cfg = preset_config(args.preset or "desk", seed=args.seed if args.seed is not None else 0)
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.jobs is not None:
        overrides["n_jobs"] = args.jobs
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    result = run_experiment(cfg, progress=True)
    paths = emit_outputs(result, cfg, plot=not args.no_plot)
    for (a, b), hist in zip(result.segments, result.action_histogram):
        freqs = "  ".join(f"p={p:g}:{f:.3f}" for p, f in hist.items())
        print(f"steps [{a}, {b}): {freqs}")
    print(f"final deviation {result.deviation_mean[-1]:.4g}" if len(result.deviation_mean) else "empty run")
    if result.failures:
        print(f"{result.failures} replication(s) failed: {result.failure_messages[0]}", file=sys.stderr)
    print(f"outputs written to {paths['steps'].parent}")
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    means = run_baseline_sweep(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_baselines_csv(means, out / "baselines.csv")
    for p, curve in sorted(means.items()):
        print(f"p={p:g}: final deviation {curve[-1]:.4g}" if len(curve) else f"p={p:g}: empty")
    print(f"written {path}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    out = args.out or Path("results")
    steps = out / "steps.csv"
    if not steps.exists():
        print(f"no steps.csv in {out}", file=sys.stderr)
        return 2
    plot = plot_deviation(steps, out / "baselines.csv", out / "deviation.png")
    actions = out / "actions.csv"
    if actions.exists():
        with open(actions, newline="") as fh:
            for row in csv.DictReader(fh):
                print(f"segment {row['segment']} [{row['start']}, {row['stop']}): p={float(row['p']):g} {float(row['frequency']):.3f}")
    print(f"written {plot}")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    results = checks.run_all()
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kbrl-lmp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the online agent and write CSVs and a plot")
    _add_config_flags(run)
    run.add_argument("--no-plot", action="store_true")
    run.set_defaults(func=_cmd_run)

    base = sub.add_parser("baseline", help="fixed-p LMP sweep over the action grid")
    _add_config_flags(base)
    base.set_defaults(func=_cmd_baseline)

    rep = sub.add_parser("report", help="regenerate the plot from existing CSVs")
    rep.add_argument("--out", type=Path, default=None, help="directory holding steps.csv")
    rep.set_defaults(func=_cmd_report)

    chk = sub.add_parser("check", help="run the randomized invariant suites")
    chk.set_defaults(func=_cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
