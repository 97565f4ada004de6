"""Command-line interface.

Subcommands: analyze, depart, channel, optimize, simulate, validate.
Every run reads one JSON scenario config (or the built-in default) and
writes JSON summaries plus CSV tables into the output directory.
Exit codes: 0 success, 1 infeasible/unstable model or failed validation,
2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import chain
from .channel import UnstableChannelError, solve_sigma
from .config import Config, ConfigError, default_config, load_config
from .departure import build_departure_model
from .power import DesignContext, brute_force_search, normalized_power, pso_search, write_trace_csv
from .sim import NetworkConfig, SimConfig, simulate_network, simulate_queue
from .validate import format_report, run_validation


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _empty_probability(config: Config, analysis: chain.ChainAnalysis) -> Optional[float]:
    # PASTA: an arrival finds the system empty with the idle-fraction
    # probability when the arbitrary-epoch source is selected.
    if config.departure.empty_probability_source == "arbitrary-epoch":
        return 1.0 - analysis.carried_load
    return None


def _departure_model(config: Config, analysis: chain.ChainAnalysis):
    return build_departure_model(
        analysis.post_departure, config.policy, config.services, config.arrivals,
        window_split=config.departure.window_split,
        window_start=config.departure.window_start,
        mu_eff=config.departure.mu_eff,
        empty_probability=_empty_probability(config, analysis),
    )


def _design_context(config: Config) -> DesignContext:
    return DesignContext(
        arrivals=config.arrivals,
        capacity=config.policy.capacity,
        services=config.services,
        channel=config.channel,
        power=config.power,
        delay_bound=config.delay_bound,
        constraint=config.constraint,
        wait_variant=config.wait_variant,
        power_basis=config.power_basis,
        window_split=config.departure.window_split,
        window_start=config.departure.window_start,
        mu_eff=config.departure.mu_eff,
    )


def cmd_analyze(config: Config, out: Path) -> int:
    analysis = chain.analyze(config.policy, config.services, config.arrivals)
    _write_json(out / "analyze.json", {
        "arrival_rate": config.arrivals.rate,
        "capacity": config.policy.capacity,
        "thresholds": list(config.policy.thresholds),
        "t_mean": analysis.t_mean,
        "carried_load": analysis.carried_load,
        "mean_wait_inclusive": analysis.wait_inclusive,
        "mean_wait_exclusive": analysis.wait_exclusive,
        "normalized_power": normalized_power(
            analysis.epoch_renormalized, config.policy, config.power),
    })
    states = np.arange(config.policy.capacity + 1)
    _write_csv(out / "distributions.csv",
               ["state", "post_departure", "epoch_busy_only", "epoch_renormalized"],
               zip(states, analysis.post_departure,
                   analysis.epoch_busy_only, analysis.epoch_renormalized))
    print(f"t_mean={analysis.t_mean:.6g}s carried_load={analysis.carried_load:.4f} "
          f"wait_inclusive={analysis.wait_inclusive:.6g}s "
          f"wait_exclusive={analysis.wait_exclusive:.6g}s")
    return 0


def cmd_depart(config: Config, out: Path) -> int:
    analysis = chain.analyze(config.policy, config.services, config.arrivals)
    model = _departure_model(config, analysis)
    _write_json(out / "departure_model.json", model.to_record())
    grid = np.linspace(0.0, 10.0 * config.arrivals.rate, 201)
    _write_csv(out / "departure_laplace.csv", ["s", "transform"],
               ((s, model.laplace(s)) for s in grid))
    print(f"empty_probability={model.empty_probability:.6f} "
          f"nonempty_mean={model.nonempty_mean:.6g}s empty_mean={model.empty_mean:.6g}s"
          + (" (amplitude warning: negative density fit)" if model.amplitude_warning else ""))
    return 0


def cmd_channel(config: Config, out: Path) -> int:
    analysis = chain.analyze(config.policy, config.services, config.arrivals)
    model = _departure_model(config, analysis)
    result = solve_sigma(model, config.channel.per_queue_rate)
    _write_json(out / "channel.json", {
        "sigma": result.sigma,
        "channel_wait": result.wait,
        "iterations": result.iterations,
        "method": result.method,
        "per_queue_rate": config.channel.per_queue_rate,
        "queues": config.channel.queues,
    })
    print(f"sigma={result.sigma:.6f} channel_wait={result.wait:.6g}s "
          f"({result.iterations} iterations, {result.method})")
    return 0


def cmd_optimize(config: Config, out: Path) -> int:
    context = _design_context(config)
    bf = brute_force_search(context)
    pso = pso_search(context, config.pso)
    write_trace_csv(pso.trace, out / "pso_trace.csv")

    def _result(res):
        if res.best is None:
            return {"feasible": False, "reason": "no feasible design"}
        return {
            "feasible": True,
            "thresholds": list(res.best.thresholds),
            "normalized_power": res.best.normalized_power,
            "queue_wait": res.best.queue_wait,
            "channel_wait": res.best.channel_wait,
            "system_wait": res.best.system_wait,
        }

    _write_json(out / "optimize.json", {
        "delay_bound": config.delay_bound,
        "constraint": config.constraint,
        "pso_seed": config.pso.seed,
        "brute_force": {**_result(bf), "evaluations": bf.evaluations,
                        "feasible_count": bf.feasible_count},
        "pso": {**_result(pso), "evaluations": pso.evaluations},
    })
    print(f"brute force: {bf.message} ({bf.evaluations} evaluations)")
    print(f"pso:         {pso.message} ({pso.evaluations} evaluations, seed {config.pso.seed})")
    if bf.best is None and pso.best is None:
        print("no feasible design under the configured delay bound", file=sys.stderr)
        return 1
    return 0


def cmd_simulate(config: Config, out: Path, emit_samples: bool, network: bool) -> int:
    sim_cfg = SimConfig(
        arrival_rate=config.arrivals.rate, policy=config.policy,
        services=config.services, horizon=config.sim.horizon,
        warmup=config.sim.warmup, seed=config.sim.seed,
    )
    stats = simulate_queue(sim_cfg)
    _write_json(out / "simulate.json", {
        "seed": config.sim.seed,
        "horizon": config.sim.horizon,
        "warmup": sim_cfg.effective_warmup,
        "arrivals": stats.arrivals,
        "departures": stats.departures,
        "drops": stats.drops,
        "blocking_fraction": stats.blocking_fraction,
        "mean_sojourn": stats.mean_sojourn,
        "sojourn_halfwidth": stats.sojourn_halfwidth,
        "mean_interdeparture": stats.mean_interdeparture,
        "busy_fraction": stats.busy_fraction,
        "time_average_system_length": stats.time_average_system_length,
        "region_service_counts": stats.region_service_counts,
    })
    states = np.arange(stats.system_length_hist.size)
    _write_csv(out / "histograms.csv",
               ["state", "system_length_time_fraction", "queue_length_time_fraction"],
               ((int(s),
                 stats.system_length_hist[s],
                 stats.queue_length_hist[s] if s < stats.queue_length_hist.size else 0.0)
                for s in states))
    if emit_samples:
        _write_csv(out / "interdeparture_samples.csv",
                   ["interdeparture_seconds", "arrived_to_empty"],
                   zip(stats.interdeparture, stats.found_empty.astype(int)))
    print(f"simulated {stats.departures} departures: mean_sojourn={stats.mean_sojourn:.6g}s "
          f"(+/-{stats.sojourn_halfwidth:.2g}) blocking={stats.blocking_fraction:.3g}")

    if network:
        net_cfg = SimConfig(
            arrival_rate=config.arrivals.rate, policy=config.policy,
            services=config.services, horizon=config.sim.horizon,
            warmup=config.sim.warmup, seed=config.sim.seed,
            network=NetworkConfig(queues=config.channel.queues,
                                  channel_rate=config.channel.rate,
                                  slot_mode=config.slot_mode, feed=config.sim.feed),
        )
        net = simulate_network(net_cfg)
        _write_json(out / "network.json", {
            "seed": config.sim.seed,
            "queues": config.channel.queues,
            "channel_rate": config.channel.rate,
            "slot_mode": config.slot_mode,
            "channel_services": net.channel_services,
            "mean_channel_wait": net.mean_channel_wait,
            "channel_wait_halfwidth": net.channel_wait_halfwidth,
            "visit_rates": net.visit_rates,
            "served_per_queue": net.served_per_queue,
            "device_drops": net.device_drops,
        })
        print(f"network: mean_channel_wait={net.mean_channel_wait:.6g}s "
              f"(+/-{net.channel_wait_halfwidth:.2g})")
    return 0


def cmd_validate(config: Config, out: Path) -> int:
    report = run_validation(config)
    _write_json(out / "validate.json", {
        "seed": report.seed,
        "horizon": report.horizon,
        "passed": report.passed,
        "rows": [dataclasses.asdict(row) for row in report.rows],
    })
    _write_csv(out / "validate.csv",
               ["quantity", "analytic", "simulated", "error", "tolerance", "kind", "passed"],
               ((r.quantity, r.analytic, r.simulated, r.error, r.tolerance, r.kind,
                 int(r.passed)) for r in report.rows))
    print(format_report(report))
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segqueue",
        description="Analyze, simulate and optimize queue-length-dependent "
                    "service-rate queues on a polled TDMA channel.",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="scenario config JSON (built-in default scenario if omitted)")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config output_dir)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the simulation and PSO seeds")
    parser.add_argument("--horizon", type=int, default=None,
                        help="override the simulation horizon (departures)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", help="embedded-chain distributions and delay metrics")
    sub.add_parser("depart", help="inter-departure model and its transform samples")
    sub.add_parser("channel", help="G/M/1 channel fixed point and wait")
    sub.add_parser("optimize", help="brute-force and PSO threshold search")
    sim_p = sub.add_parser("simulate", help="event simulation of the configured scenario")
    sim_p.add_argument("--emit-samples", action="store_true",
                       help="write raw tagged inter-departure samples as CSV")
    sim_p.add_argument("--network", action="store_true",
                       help="also simulate the Q-queue TDMA network")
    sub.add_parser("validate", help="analytic-vs-simulation comparison table")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if args.config is not None else default_config()
        if args.seed is not None:
            config = dataclasses.replace(
                config,
                sim=dataclasses.replace(config.sim, seed=args.seed),
                pso=dataclasses.replace(config.pso, seed=args.seed),
            )
        if args.horizon is not None:
            config = dataclasses.replace(
                config, sim=dataclasses.replace(config.sim, horizon=args.horizon))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = args.out if args.out is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "analyze":
            return cmd_analyze(config, out)
        if args.command == "depart":
            return cmd_depart(config, out)
        if args.command == "channel":
            return cmd_channel(config, out)
        if args.command == "optimize":
            return cmd_optimize(config, out)
        if args.command == "simulate":
            return cmd_simulate(config, out, args.emit_samples, args.network)
        if args.command == "validate":
            return cmd_validate(config, out)
    except UnstableChannelError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
