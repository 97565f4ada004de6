#!/usr/bin/env python3
"""Compare brute-force and PSO threshold search across delay bounds.

Prints one row per bound with the best design, normalized power,
evaluation counts and wall time for both searches, and writes the PSO
trace of the last bound to pso_trace.csv.

Usage: python scripts/optimizer_comparison.py [--config PATH] [--bounds B1 B2 ...]
"""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from segqueue.config import default_config, load_config
from segqueue.power import DesignContext, brute_force_search, pso_search, write_trace_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--bounds", type=float, nargs="+", default=None)
    args = parser.parse_args()

    config = load_config(args.config) if args.config else default_config()
    bounds = args.bounds if args.bounds else [0.029, 0.030, 0.031]

    print(f"{'bound':>8} | {'BF best':>10} {'BF NP':>10} {'evals':>6} {'time':>7} | "
          f"{'PSO best':>10} {'PSO NP':>10} {'evals':>6} {'time':>7}")
    trace = None
    for bound in bounds:
        context = DesignContext(
            arrivals=config.arrivals, capacity=config.policy.capacity,
            services=config.services, channel=config.channel, power=config.power,
            delay_bound=bound, constraint=config.constraint,
            wait_variant=config.wait_variant, power_basis=config.power_basis,
            window_split=config.departure.window_split,
        )
        t0 = time.perf_counter()
        bf = brute_force_search(context)
        bf_time = time.perf_counter() - t0
        t0 = time.perf_counter()
        pso = pso_search(context, config.pso)
        pso_time = time.perf_counter() - t0
        trace = pso.trace

        def cell(res):
            if res.best is None:
                return f"{'-':>10} {'inf':>10}"
            return f"{str(res.best.thresholds):>10} {res.best.normalized_power:>10.6f}"

        print(f"{bound:>8.4f} | {cell(bf)} {bf.evaluations:>6} {bf_time:>6.2f}s | "
              f"{cell(pso)} {pso.evaluations:>6} {pso_time:>6.2f}s")

    if trace is not None:
        write_trace_csv(trace, "pso_trace.csv")
        print("last PSO trace written to pso_trace.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
