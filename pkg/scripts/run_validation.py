#!/usr/bin/env python3
"""Run the analytic-vs-simulation validation table for a scenario.

Usage: python scripts/run_validation.py [--config PATH] [--horizon N] [--seed N]
"""
import argparse
import dataclasses
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from segqueue.config import default_config, load_config
from segqueue.validate import format_report, run_validation


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--horizon", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    config = load_config(args.config) if args.config else default_config()
    if args.horizon is not None:
        config = dataclasses.replace(
            config, sim=dataclasses.replace(config.sim, horizon=args.horizon))
    if args.seed is not None:
        config = dataclasses.replace(
            config, sim=dataclasses.replace(config.sim, seed=args.seed))

    report = run_validation(config)
    print(format_report(report))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
