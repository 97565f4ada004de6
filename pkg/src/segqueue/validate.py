"""Side-by-side comparison of every analytical quantity against the
event-simulation oracle for one scenario.

The distribution-shape rows (service-time atoms by value clustering and
the empty-arrival density fit) are checked under a deterministic-service
companion of the configured scenario: the atoms of the inter-departure
law and the lower support edge of the fitted density exist only when
services are constant, which is also the regime the parametric form was
designed for.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import DeterministicService
from . import chain
from .channel import solve_sigma
from .config import Config
from .departure import atom_weights, build_departure_model
from .sim import NetworkConfig, SimConfig, simulate_network, simulate_queue, empirical_interdeparture


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    analytic: float
    simulated: float
    error: float
    tolerance: float
    kind: str            # "relative" or "absolute"
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ComparisonRow, ...]
    seed: int
    horizon: int

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


def _relative(name: str, analytic: float, simulated: float, tol: float) -> ComparisonRow:
    err = float(abs(analytic - simulated) / abs(simulated))
    return ComparisonRow(name, float(analytic), float(simulated), err, tol,
                         "relative", bool(err <= tol))


def _absolute(name: str, analytic: float, simulated: float, tol: float) -> ComparisonRow:
    err = float(abs(analytic - simulated))
    return ComparisonRow(name, float(analytic), float(simulated), err, tol,
                         "absolute", bool(err <= tol))


def empty_fit_ks(model, empty_samples: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between the fitted empty-arrival law
    and the empirical empty-tagged samples."""
    ordered = np.sort(np.asarray(empty_samples, dtype=float))
    n = ordered.size
    if n == 0:
        raise ValueError("no empty-tagged samples")
    cdf = np.array([model.empty_cdf(t) for t in ordered])
    steps = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(cdf - steps)), np.max(np.abs(cdf - steps + 1.0 / n))))


def _deterministic_companion(config: Config) -> tuple[tuple[DeterministicService, ...], SimConfig]:
    services = tuple(DeterministicService(svc.mean) for svc in config.services)
    sim_cfg = SimConfig(
        arrival_rate=config.arrivals.rate,
        policy=config.policy,
        services=services,
        horizon=config.sim.horizon,
        warmup=config.sim.warmup,
        seed=config.sim.seed + 1,
    )
    return services, sim_cfg


def run_validation(config: Config, network_horizon: Optional[int] = None) -> ValidationReport:
    """Run the analytic pipeline and the simulators, returning one
    pass/fail row per validated quantity."""
    arrivals = config.arrivals
    policy = config.policy
    lam = arrivals.rate

    analysis = chain.analyze(policy, config.services, arrivals)
    model = build_departure_model(
        analysis.post_departure, policy, config.services, arrivals,
        window_split=config.departure.window_split,
        window_start=config.departure.window_start,
        mu_eff=config.departure.mu_eff,
    )
    wait = (analysis.wait_inclusive if config.wait_variant == "inclusive"
            else analysis.wait_exclusive)

    main_cfg = SimConfig(
        arrival_rate=lam, policy=policy, services=config.services,
        horizon=config.sim.horizon, warmup=config.sim.warmup, seed=config.sim.seed,
    )
    stats = simulate_queue(main_cfg)

    rows: list[ComparisonRow] = [
        _relative("mean departure interval (s)", analysis.t_mean, stats.mean_interdeparture, 0.01),
        _relative("mean inter-departure vs 1/lambda (s)", 1.0 / lam, stats.mean_interdeparture, 0.01),
        _relative("carried load (busy fraction)", analysis.carried_load, stats.busy_fraction, 0.01),
        _relative(f"mean sojourn, {config.wait_variant} variant (s)", wait, stats.mean_sojourn, 0.02),
    ]

    empty_mask = stats.found_empty
    sim_nonempty_mean = float(stats.interdeparture[~empty_mask].mean())
    sim_empty_mean = float(stats.interdeparture[empty_mask].mean())
    rows.append(_relative("nonempty-arrival inter-departure mean (s)",
                          model.nonempty_mean, sim_nonempty_mean, 0.02))
    rows.append(_relative("empty-arrival inter-departure mean (s)",
                          model.empty_mean, sim_empty_mean, 0.02))

    tv = 0.5 * float(np.abs(analysis.epoch_renormalized - stats.queue_length_hist).sum())
    rows.append(ComparisonRow("queue-length distribution (TV distance)",
                              0.0, tv, tv, 0.02, "absolute", bool(tv <= 0.02)))

    weights = atom_weights(analysis.post_departure, policy, config.services,
                           model.empty_probability)
    mix = stats.region_nonempty_counts / max(stats.region_nonempty_counts.sum(), 1)
    mix_err = float(max(abs(w - float(m)) for (_, w), m in zip(weights, mix)))
    rows.append(ComparisonRow("nonempty service-mix weights (max dev)",
                              0.0, mix_err, mix_err, 0.02, "absolute", bool(mix_err <= 0.02)))

    det_services, det_cfg = _deterministic_companion(config)
    det_analysis = chain.analyze(policy, det_services, arrivals)
    det_model = build_departure_model(
        det_analysis.post_departure, policy, det_services, arrivals,
        window_split=config.departure.window_split,
        window_start=config.departure.window_start,
        mu_eff=config.departure.mu_eff,
    )
    det_stats = simulate_queue(det_cfg)
    split = empirical_interdeparture(
        det_stats.interdeparture, det_stats.found_empty, bin_width=1e-3,
        atom_values=[svc.mean for svc in det_services],
    )
    det_weights = atom_weights(det_analysis.post_departure, policy, det_services,
                               det_model.empty_probability)
    empirical = {t: m / split.nonempty_fraction for t, m in split.nonempty_atoms}
    atom_err = float(max(abs(w - empirical.get(t, 0.0)) for t, w in det_weights))
    rows.append(ComparisonRow("deterministic companion atom weights (max dev)",
                              0.0, atom_err, atom_err, 0.02, "absolute", bool(atom_err <= 0.02)))

    ks = empty_fit_ks(det_model, det_stats.interdeparture[det_stats.found_empty])
    rows.append(ComparisonRow("deterministic companion empty-fit (KS distance)",
                              0.0, ks, ks, 0.1, "absolute", bool(ks <= 0.1)))

    channel_pred = solve_sigma(model, config.channel.per_queue_rate)
    net_cfg = SimConfig(
        arrival_rate=lam, policy=policy, services=config.services,
        horizon=network_horizon if network_horizon is not None else config.sim.horizon // 2,
        warmup=None, seed=config.sim.seed + 2,
        network=NetworkConfig(queues=config.channel.queues,
                              channel_rate=config.channel.rate,
                              slot_mode=config.slot_mode,
                              feed=config.sim.feed),
    )
    net_stats = simulate_network(net_cfg)
    rows.append(_relative("channel wait (s)", channel_pred.wait,
                          net_stats.mean_channel_wait, 0.10))

    return ValidationReport(rows=tuple(rows), seed=config.sim.seed, horizon=config.sim.horizon)


def format_report(report: ValidationReport) -> str:
    lines = [
        f"{'quantity':<46} {'analytic':>12} {'simulated':>12} {'error':>10} {'tol':>8}  result",
        "-" * 100,
    ]
    for row in report.rows:
        err = f"{row.error:.2%}" if row.kind == "relative" else f"{row.error:.4f}"
        tol = f"{row.tolerance:.0%}" if row.kind == "relative" else f"{row.tolerance:.2f}"
        lines.append(
            f"{row.quantity:<46} {row.analytic:>12.6g} {row.simulated:>12.6g} "
            f"{err:>10} {tol:>8}  {'pass' if row.passed else 'FAIL'}"
        )
    lines.append("-" * 100)
    lines.append(f"overall: {'pass' if report.passed else 'FAIL'} "
                 f"({sum(r.passed for r in report.rows)}/{len(report.rows)} rows)")
    return "\n".join(lines)
