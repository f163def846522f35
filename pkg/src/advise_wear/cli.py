"""Command line: ``run`` an experiment to CSV, ``compare`` CSV files."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from typing import List, Optional

from .config import load_config
from .errors import AdviseError, MetricsFileError
from .experiment import ARM_ORDER, Arm, ExperimentConfig, run_experiment
from .metrics import compare_arms, emit_csv, read_csv, smoothed_curve

log = logging.getLogger("advise_wear")

# exit status per error category; anything else maps to 1
EXIT_CODES = {"config": 2, "invalid-input": 2, "no-feedback": 2, "io": 3, "state": 4}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="advise-wear",
        description="Feedback-shaped Q-learning for wearable feature selection.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one arm (or all) and write a learning-curve CSV")
    run.add_argument("--config", help="config file; library defaults if omitted")
    run.add_argument(
        "--arm",
        help="MultiTrainers, PlainQL, RandomPolicy, FixedLow, or 'all' (default: config value)",
    )
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--seed-override", type=int, nargs="+", metavar="SEED",
                     help="replace the configured seed list")
    run.add_argument("--episodes-override", type=int, metavar="N",
                     help="replace the configured episode count")
    run.add_argument("--workers", type=int, help="parallel (arm, seed) runs")

    cmp_ = sub.add_parser("compare", help="summarise the final window of CSV files")
    cmp_.add_argument("--inputs", nargs="+", required=True, help="CSV files from 'run'")
    cmp_.add_argument("--window", type=int, default=100, help="final episodes per seed (default 100)")
    cmp_.add_argument("--json", action="store_true", help="machine-readable report")
    cmp_.add_argument("--curves", metavar="CSV",
                      help="also write seed-averaged trailing-mean curves to this file")
    cmp_.add_argument("--smooth", type=int, default=100,
                      help="trailing window for --curves (default 100)")
    return p


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed_override:
        cfg.seeds = tuple(args.seed_override)
    if args.episodes_override is not None:
        cfg.episodes = args.episodes_override
    if args.workers is not None:
        cfg.workers = args.workers
    arms: List[Arm] = [cfg.arm]
    if args.arm:
        arms = list(ARM_ORDER) if args.arm.lower() == "all" else [Arm.parse(args.arm)]
    cfg.validate()
    start = time.perf_counter()
    n = emit_csv(run_experiment(cfg, arms), args.out, num_trainers=len(cfg.trainers))
    log.info("wrote %d rows to %s in %.1fs", n, args.out, time.perf_counter() - start)
    return 0


def cmd_compare(args) -> int:
    report = compare_arms(args.inputs, args.window)
    if args.json:
        payload = {
            "window": report.window,
            "summaries": {
                arm: {m: dataclasses.asdict(s) for m, s in by_metric.items()}
                for arm, by_metric in report.summaries.items()
            },
            "pairwise": [
                dict(dataclasses.asdict(p), relation=p.relation) for p in report.pairwise
            ],
        }
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(report.render())
    if args.curves:
        _write_curves(args.inputs, report, args.smooth, args.curves)
    return 0


def _write_curves(inputs, report, window: int, out) -> None:
    rows = []
    for path in inputs:
        rows.extend(read_csv(path)[1])
    columns, names = [], []
    for arm in report.arms:
        for metric in report.metrics:
            if metric in report.summaries[arm]:
                columns.append(smoothed_curve(rows, arm, metric, window))
                names.append(f"{arm}:{metric}")
    length = max(len(c) for c in columns)
    try:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode"] + names)
            for i in range(length):
                w.writerow([i] + [format(c[i], ".6g") if i < len(c) else "" for c in columns])
    except OSError as exc:
        raise MetricsFileError(out, exc.strerror or str(exc)) from exc


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    handler = {"run": cmd_run, "compare": cmd_compare}[args.command]
    try:
        return handler(args)
    except AdviseError as exc:
        # one JSON object on stderr so callers can branch on the category
        err = {"error": exc.category, "message": str(exc)}
        if getattr(exc, "field", None):
            err["field"] = exc.field
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_CODES.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
