"""Embedded-chain analysis of the threshold-controlled finite queue.

The chain lives on post-departure system lengths 0..K.  `matrix[i, j]` is
the probability that the next departure leaves j customers behind given
the current one left i.  Arrivals that would push the backlog past K
during one service are lumped into the last column through the tail
probabilities, so every row is stochastic by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .model import (
    DeterministicService,
    ExponentialService,
    PoissonArrivals,
    ServiceSpec,
    ThresholdPolicy,
    check_services,
)

WAIT_VARIANTS = ("inclusive", "exclusive")
EPOCH_MODES = ("renormalized", "busy-only")

_QUAD_TOL = 1e-12


def _pick_service(services: Sequence[ServiceSpec], region: int) -> ServiceSpec:
    if not 1 <= region <= len(services):
        raise ValueError(f"invalid region index {region}; expected 1..{len(services)}")
    return services[region - 1]


def _check_count(count: int) -> None:
    if not isinstance(count, (int, np.integer)) or count < 0:
        raise ValueError(f"arrival count must be a nonnegative integer, got {count!r}")


def _poisson_weight(lam: float, n: int, t: float) -> float:
    # (lam*t)^n / n! * exp(-lam*t), computed in log space for large n
    if t == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(lam * t) - lam * t - math.lgamma(n + 1))


def arrivals_during_service(
    region: int, count: int, arrivals: PoissonArrivals, services: Sequence[ServiceSpec]
) -> float:
    """Probability that `count` Poisson arrivals occur during one service
    drawn from the given region's law."""
    svc = _pick_service(services, region)
    _check_count(count)
    lam = arrivals.rate
    if isinstance(svc, ExponentialService):
        ratio = lam / (lam + svc.rate)
        return (svc.rate / (lam + svc.rate)) * ratio ** count
    if isinstance(svc, DeterministicService):
        return _poisson_weight(lam, count, svc.duration)
    value, _ = integrate.quad(
        lambda t: _poisson_weight(lam, count, t) * svc.pdf(t),
        0.0, np.inf, epsabs=_QUAD_TOL, limit=200,
    )
    return value


def tail_probability(
    region: int, count: int, arrivals: PoissonArrivals, services: Sequence[ServiceSpec]
) -> float:
    """Probability of `count` or more arrivals during one service of the
    region; the empty sum gives 1 at count=0."""
    svc = _pick_service(services, region)
    _check_count(count)
    lam = arrivals.rate
    if isinstance(svc, ExponentialService):
        return (lam / (lam + svc.rate)) ** count
    if isinstance(svc, DeterministicService):
        return float(stats.poisson.sf(count - 1, lam * svc.duration))
    total = sum(arrivals_during_service(region, n, arrivals, services) for n in range(count))
    return max(1.0 - total, 0.0)


def _count_pmf_vector(svc: ServiceSpec, lam: float, n_max: int) -> np.ndarray:
    """a_0..a_{n_max} for one region."""
    if isinstance(svc, ExponentialService):
        ratio = lam / (lam + svc.rate)
        return (svc.rate / (lam + svc.rate)) * ratio ** np.arange(n_max + 1)
    if isinstance(svc, DeterministicService):
        return stats.poisson.pmf(np.arange(n_max + 1), lam * svc.duration)
    services = (svc,)
    dummy = PoissonArrivals(lam)
    return np.array([arrivals_during_service(1, n, dummy, services) for n in range(n_max + 1)])


def _count_tail_vector(svc: ServiceSpec, lam: float, n_max: int) -> np.ndarray:
    """tail_0..tail_{n_max}; tail_n = P{n or more arrivals during a service}."""
    if isinstance(svc, ExponentialService):
        return (lam / (lam + svc.rate)) ** np.arange(n_max + 1)
    if isinstance(svc, DeterministicService):
        return stats.poisson.sf(np.arange(n_max + 1) - 1, lam * svc.duration)
    pmf = _count_pmf_vector(svc, lam, n_max)
    tails = 1.0 - np.concatenate(([0.0], np.cumsum(pmf)))[: n_max + 1]
    return np.maximum(tails, 0.0)


def build_embedded_matrix(
    policy: ThresholdPolicy,
    services: Sequence[ServiceSpec],
    arrivals: PoissonArrivals,
) -> np.ndarray:
    """Transition matrix of the post-departure chain on states 0..K.

    Rows 0 and 1 are identical: a packet arriving to an empty system
    starts a region-1 service exactly as if the previous departure had
    left one customer behind.
    """
    check_services(policy, services)
    K = policy.capacity
    lam = arrivals.rate
    pmfs = [_count_pmf_vector(svc, lam, K) for svc in services]
    tails = [_count_tail_vector(svc, lam, K + 1) for svc in services]
    region = policy.region_index_array()

    matrix = np.zeros((K + 1, K + 1))
    matrix[0, :K] = pmfs[0][:K]
    matrix[0, K] = tails[0][K]
    for i in range(1, K + 1):
        r = region[i]
        m = K - i + 1
        matrix[i, i - 1:K] = pmfs[r][:m]
        matrix[i, K] = tails[r][m]
    return matrix


def solve_stationary(matrix: np.ndarray, residual_tol: float = 1e-10) -> np.ndarray:
    """Stationary probability vector p with p @ matrix = p and sum(p) = 1,
    via a direct dense solve with the last balance row replaced by the
    normalization constraint."""
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"transition matrix must be square, got shape {matrix.shape}")
    system = matrix.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        p = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(system)
        raise ValueError(f"singular embedded-chain system (condition estimate {cond:.3e})") from exc
    if p.min() < -1e-9:
        cond = np.linalg.cond(system)
        raise ValueError(
            f"stationary solve produced negative probability {p.min():.3e}; "
            f"the chain is numerically degenerate (condition estimate {cond:.3e})"
        )
    p = np.maximum(p, 0.0)   # clip solver roundoff
    p /= p.sum()
    residual = float(np.max(np.abs(p @ matrix - p)))
    if residual > residual_tol:
        cond = np.linalg.cond(system)
        raise ValueError(
            f"stationary solve residual {residual:.3e} exceeds {residual_tol:.1e} "
            f"(condition estimate {cond:.3e})"
        )
    return p


def mean_departure_interval(
    p: np.ndarray,
    services: Sequence[ServiceSpec],
    arrivals: PoissonArrivals,
    policy: ThresholdPolicy,
) -> float:
    """Mean time between successive departures: the idle state pays one
    inter-arrival gap plus a region-1 service, every busy state pays its
    region's mean service time."""
    check_services(policy, services)
    p = np.asarray(p, dtype=float)
    means = np.array([svc.mean for svc in services])
    region = policy.region_index_array()
    busy = float(np.dot(p[1:], means[region[1:]]))
    return p[0] * (1.0 / arrivals.rate + means[0]) + busy


def carried_load(
    p: np.ndarray,
    services: Sequence[ServiceSpec],
    policy: ThresholdPolicy,
    t_mean: float,
) -> float:
    """Long-run fraction of time the server is busy."""
    if not t_mean > 0:
        raise ValueError(f"mean departure interval must be positive, got {t_mean}")
    check_services(policy, services)
    p = np.asarray(p, dtype=float)
    means = np.array([svc.mean for svc in services])
    region = policy.region_index_array()
    numerator = p[0] * means[0] + float(np.dot(p[1:], means[region[1:]]))
    return numerator / t_mean


def _staircase_groups(policy: ThresholdPolicy) -> list[tuple[int, int, int]]:
    """(region, lo, hi) state groups for the sojourn staircase.

    Group k spans L_{k-1} .. L_k - 1 (with L_0 = 0); the final group is
    extended to include the top state K so the probability mass is
    covered completely and the transform normalizes to one.
    """
    edges = (0,) + policy.thresholds + (policy.capacity,)
    groups = []
    for k in range(1, policy.region_count + 1):
        lo = edges[k - 1]
        hi = edges[k] - 1 if k < policy.region_count else policy.capacity
        groups.append((k, lo, hi))
    return groups


def mean_system_time(
    p: np.ndarray,
    policy: ThresholdPolicy,
    services: Sequence[ServiceSpec],
    variant: str = "inclusive",
) -> float:
    """Mean sojourn time from the post-departure distribution.

    A customer that begins its wait with i in system drains those i
    services down the threshold staircase.  The "inclusive" variant also
    counts the customer's own region-1 service in the first group, which
    is what the transform derivative gives; "exclusive" drops that term.
    """
    if variant not in WAIT_VARIANTS:
        raise ValueError(f"unknown wait variant {variant!r}; expected one of {WAIT_VARIANTS}")
    check_services(policy, services)
    p = np.asarray(p, dtype=float)
    means = np.array([svc.mean for svc in services])
    edges = np.array((0,) + policy.thresholds)
    prior = np.concatenate(([0.0], np.cumsum(np.diff(np.append(edges, policy.capacity))[:-1] * means[:-1])))

    total = 0.0
    for k, lo, hi in _staircase_groups(policy):
        states = np.arange(lo, hi + 1)
        steps = states + 1 - edges[k - 1]
        if k == 1 and variant == "exclusive":
            steps = steps - 1
        total += float(np.dot(p[lo:hi + 1], steps * means[k - 1] + prior[k - 1]))
    return total


def system_time_lst(
    p: np.ndarray,
    policy: ThresholdPolicy,
    services: Sequence[ServiceSpec],
    s: float,
) -> float:
    """Sojourn-time transform: the product-form staircase with one factor
    per service the tagged customer must wait out, plus its own."""
    if s < 0:
        raise ValueError(f"transform argument must be nonnegative, got {s}")
    check_services(policy, services)
    p = np.asarray(p, dtype=float)
    factors = np.array([svc.laplace(s) for svc in services])
    edges = (0,) + policy.thresholds

    total = 0.0
    prior_product = 1.0
    for k, lo, hi in _staircase_groups(policy):
        states = np.arange(lo, hi + 1)
        powers = factors[k - 1] ** (states + 1 - edges[k - 1])
        total += float(np.dot(p[lo:hi + 1], powers)) * prior_product
        if k < policy.region_count:
            prior_product *= factors[k - 1] ** (edges[k] - edges[k - 1])
    return total


def residual_arrival_probability(
    region: int, count: int, arrivals: PoissonArrivals, services: Sequence[ServiceSpec]
) -> float:
    """Probability that `count` customers arrive during the residual
    (length-biased remaining) service time of the region's law."""
    svc = _pick_service(services, region)
    _check_count(count)
    lam = arrivals.rate
    if isinstance(svc, ExponentialService):
        # memoryless: residual equals a fresh service
        return arrivals_during_service(region, count, arrivals, services)
    if isinstance(svc, DeterministicService):
        m = lam * svc.duration
        return float(stats.poisson.sf(count, m)) / m
    value, _ = integrate.quad(
        lambda t: _poisson_weight(lam, count, t) * svc.survival(t),
        0.0, np.inf, epsabs=_QUAD_TOL, limit=200,
    )
    return value / svc.mean


def _residual_pmf_vector(svc: ServiceSpec, lam: float, n_max: int) -> np.ndarray:
    if isinstance(svc, ExponentialService):
        return _count_pmf_vector(svc, lam, n_max)
    if isinstance(svc, DeterministicService):
        m = lam * svc.duration
        return stats.poisson.sf(np.arange(n_max + 1), m) / m
    services = (svc,)
    dummy = PoissonArrivals(lam)
    return np.array([residual_arrival_probability(1, n, dummy, services) for n in range(n_max + 1)])


def _residual_tail_vector(svc: ServiceSpec, lam: float, n_max: int) -> np.ndarray:
    pmf = _residual_pmf_vector(svc, lam, n_max)
    tails = 1.0 - np.concatenate(([0.0], np.cumsum(pmf)))[: n_max + 1]
    return np.maximum(tails, 0.0)


def arbitrary_epoch_distribution(
    p: np.ndarray,
    rho: float,
    policy: ThresholdPolicy,
    services: Sequence[ServiceSpec],
    arrivals: PoissonArrivals,
    mode: str = "renormalized",
) -> np.ndarray:
    """Queue-length distribution at an arbitrary epoch.

    Convolves the post-departure vector with the residual-arrival
    probabilities, scaled by the carried load.  In "busy-only" mode the
    result sums to the carried load; "renormalized" assigns the deficit
    (the idle fraction) to state 0 so the vector is a distribution.
    """
    if mode not in EPOCH_MODES:
        raise ValueError(f"unknown epoch mode {mode!r}; expected one of {EPOCH_MODES}")
    check_services(policy, services)
    p = np.asarray(p, dtype=float)
    K = policy.capacity
    lam = arrivals.rate
    region = policy.region_index_array()

    res_pmfs = [_residual_pmf_vector(svc, lam, K) for svc in services]
    res_tails = [_residual_tail_vector(svc, lam, K + 1) for svc in services]

    core = p[0] * res_pmfs[0][:K].copy()
    for r in range(policy.region_count):
        weights = np.where(region == r, p, 0.0)
        weights[0] = 0.0
        if weights.any():
            conv = np.convolve(weights, res_pmfs[r])
            core += conv[1:K + 1]

    top = p[0] * res_tails[0][K]
    for i in range(1, K + 1):
        top += p[i] * res_tails[region[i]][K - i + 1]

    pi = rho * np.concatenate((core, [top]))
    if mode == "renormalized":
        pi[0] += 1.0 - pi.sum()
    return np.maximum(pi, 0.0)


@dataclass(frozen=True)
class ChainAnalysis:
    """Everything the downstream models need from the embedded chain."""

    policy: ThresholdPolicy
    post_departure: np.ndarray
    t_mean: float
    carried_load: float
    wait_inclusive: float
    wait_exclusive: float
    epoch_busy_only: np.ndarray
    epoch_renormalized: np.ndarray


def analyze(
    policy: ThresholdPolicy,
    services: Sequence[ServiceSpec],
    arrivals: PoissonArrivals,
) -> ChainAnalysis:
    """Run the full embedded-chain pipeline for one scenario."""
    matrix = build_embedded_matrix(policy, services, arrivals)
    p = solve_stationary(matrix)
    t_mean = mean_departure_interval(p, services, arrivals, policy)
    rho = carried_load(p, services, policy, t_mean)
    return ChainAnalysis(
        policy=policy,
        post_departure=p,
        t_mean=t_mean,
        carried_load=rho,
        wait_inclusive=mean_system_time(p, policy, services, "inclusive"),
        wait_exclusive=mean_system_time(p, policy, services, "exclusive"),
        epoch_busy_only=arbitrary_epoch_distribution(p, rho, policy, services, arrivals, "busy-only"),
        epoch_renormalized=arbitrary_epoch_distribution(p, rho, policy, services, arrivals, "renormalized"),
    )
