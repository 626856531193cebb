"""Command line: ``lplab list | run | check``."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import HypothesisViolation, UnknownExperiment
from .lab.experiments import list_experiments, run_experiment
from .lab.report import write_csv, write_json


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lplab", description="Square-function inequality experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("list", help="list experiment ids")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", required=True, help="report JSON path")
    run.add_argument("--csv", help="per-case CSV path")
    sub.add_parser("check", help="run the invariant suite")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "list":
        for eid, title in list_experiments():
            print(f"{eid:5s} {title}")
        return 0
    if args.cmd == "check":
        from .lab.invariants import run_checks

        res = run_checks()
        for name, ok in res.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        return 0 if all(res.values()) else 1
    try:
        config = {}
        if args.config:
            with open(args.config) as fh:
                config = json.load(fh)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise HypothesisViolation("seed must be an unsigned 64-bit integer")
        report = run_experiment(args.experiment, config, args.seed)
    except (UnknownExperiment, HypothesisViolation, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_json(report, args.out)
    if args.csv:
        write_csv(report, args.csv)
    print(f"{args.experiment}: {'PASS' if report['pass'] else 'FAIL'} ({report['wall_ms']} ms)")
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
