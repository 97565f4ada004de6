"""Normalized-power evaluation of threshold designs and the two searches
over them: exhaustive enumeration and an integer-rounded particle swarm.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .model import PoissonArrivals, ServiceSpec, ThresholdPolicy
from . import chain
from .channel import ChannelSpec, UnstableChannelError, solve_sigma
from .departure import DEFAULT_WINDOW_SPLIT, build_departure_model

CONSTRAINT_MODES = ("system", "queue-only")
POWER_BASES = ("arbitrary-epoch", "post-departure")


@dataclass(frozen=True)
class PowerSpec:
    """Per-region clock frequencies (Hz) and the scale factor that folds
    the switching constant, capacitance and voltage squared into W/Hz."""

    frequencies: tuple[float, ...]
    scale: float = 1.0

    def __post_init__(self) -> None:
        freqs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, "frequencies", freqs)
        if not freqs or any(not (math.isfinite(f) and f > 0) for f in freqs):
            raise ValueError(f"frequencies must be positive and finite, got {freqs}")
        if any(a > b for a, b in zip(freqs, freqs[1:])):
            raise ValueError(f"frequencies must be nondecreasing across regions, got {freqs}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"power scale must be positive, got {self.scale}")


def normalized_power(
    dist: np.ndarray, policy: ThresholdPolicy, power: PowerSpec
) -> float:
    """Region-mass weighted power, normalized by the region-1 level; the
    scale factor cancels."""
    if len(power.frequencies) != policy.region_count:
        raise ValueError(
            f"policy defines {policy.region_count} regions but "
            f"{len(power.frequencies)} frequencies were given"
        )
    masses = policy.region_masses(dist)
    levels = power.scale * np.asarray(power.frequencies)
    return float(np.dot(masses, levels) / levels[0])


@dataclass(frozen=True)
class DesignContext:
    """Everything needed to score one threshold design end to end."""

    arrivals: PoissonArrivals
    capacity: int
    services: tuple[ServiceSpec, ...]
    channel: ChannelSpec
    power: PowerSpec
    delay_bound: float = math.inf
    constraint: str = "system"
    wait_variant: str = "inclusive"
    power_basis: str = "arbitrary-epoch"
    window_split: float = DEFAULT_WINDOW_SPLIT
    window_start: Optional[float] = None
    mu_eff: Optional[float] = None

    def __post_init__(self) -> None:
        if self.constraint not in CONSTRAINT_MODES:
            raise ValueError(f"unknown constraint mode {self.constraint!r}; "
                             f"expected one of {CONSTRAINT_MODES}")
        if self.wait_variant not in chain.WAIT_VARIANTS:
            raise ValueError(f"unknown wait variant {self.wait_variant!r}")
        if self.power_basis not in POWER_BASES:
            raise ValueError(f"unknown power basis {self.power_basis!r}; "
                             f"expected one of {POWER_BASES}")
        if len(self.power.frequencies) != len(self.services):
            raise ValueError("power spec and service list disagree on the region count")


@dataclass(frozen=True)
class DesignEvaluation:
    thresholds: tuple[int, ...]
    normalized_power: float
    queue_wait: float
    channel_wait: float
    system_wait: float
    feasible: bool
    reason: Optional[str] = None

    @property
    def objective(self) -> float:
        return self.normalized_power if self.feasible else math.inf


def _thresholds_valid(thresholds: Sequence[int], capacity: int) -> bool:
    ts = tuple(thresholds)
    if any(not float(t).is_integer() for t in ts):
        return False
    ts = tuple(int(t) for t in ts)
    if any(not 1 <= t <= capacity - 1 for t in ts):
        return False
    return all(a < b for a, b in zip(ts, ts[1:]))


def evaluate_design(thresholds: Sequence[int], context: DesignContext) -> DesignEvaluation:
    """Score one design: embedded chain -> departure model -> channel
    fixed point, then check the configured delay bound.

    Invalid threshold tuples and unstable channels yield infeasible
    evaluations, never exceptions.
    """
    ts = tuple(int(t) for t in thresholds)
    if not _thresholds_valid(thresholds, context.capacity):
        return DesignEvaluation(
            thresholds=ts, normalized_power=math.nan, queue_wait=math.nan,
            channel_wait=math.nan, system_wait=math.nan, feasible=False,
            reason=f"thresholds must be strictly increasing within [1, {context.capacity - 1}]",
        )
    policy = ThresholdPolicy(context.capacity, ts)
    analysis = chain.analyze(policy, context.services, context.arrivals)
    queue_wait = (analysis.wait_inclusive if context.wait_variant == "inclusive"
                  else analysis.wait_exclusive)
    basis = (analysis.epoch_renormalized if context.power_basis == "arbitrary-epoch"
             else analysis.post_departure)
    np_value = normalized_power(basis, policy, context.power)

    reason = None
    try:
        model = build_departure_model(
            analysis.post_departure, policy, context.services, context.arrivals,
            window_split=context.window_split, window_start=context.window_start,
            mu_eff=context.mu_eff,
        )
        channel_wait = solve_sigma(model, context.channel.per_queue_rate).wait
    except UnstableChannelError as exc:
        channel_wait = math.inf
        reason = str(exc)
    system_wait = queue_wait + channel_wait

    constrained = system_wait if context.constraint == "system" else queue_wait
    feasible = constrained <= context.delay_bound and math.isfinite(constrained)
    if not feasible and reason is None:
        reason = (f"{'system' if context.constraint == 'system' else 'queue'} wait "
                  f"{constrained:.6g} exceeds bound {context.delay_bound:.6g}")
    return DesignEvaluation(
        thresholds=ts, normalized_power=np_value, queue_wait=queue_wait,
        channel_wait=channel_wait, system_wait=system_wait,
        feasible=feasible, reason=None if feasible else reason,
    )


@dataclass(frozen=True)
class SearchResult:
    best: Optional[DesignEvaluation]
    evaluations: int
    feasible_count: int
    trace: tuple = ()

    @property
    def found(self) -> bool:
        return self.best is not None

    @property
    def message(self) -> str:
        if self.best is None:
            return "no feasible design"
        return (f"best thresholds {self.best.thresholds} with normalized power "
                f"{self.best.normalized_power:.6f}")


def brute_force_search(context: DesignContext) -> SearchResult:
    """Enumerate every threshold pair drawn from {1..K} in lexicographic
    order; K(K-1)/2 evaluations, first minimum kept on ties."""
    best: Optional[DesignEvaluation] = None
    evaluations = 0
    feasible = 0
    for pair in combinations(range(1, context.capacity + 1), 2):
        ev = evaluate_design(pair, context)
        evaluations += 1
        if ev.feasible:
            feasible += 1
            if best is None or ev.normalized_power < best.normalized_power:
                best = ev
    return SearchResult(best=best, evaluations=evaluations, feasible_count=feasible)


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 20
    iterations: int = 100
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    velocity_clamp: Optional[float] = None   # default K/4
    seed: int = 0

    def __post_init__(self) -> None:
        if not (isinstance(self.swarm_size, int) and self.swarm_size >= 2):
            raise ValueError(f"swarm size must be an integer >= 2, got {self.swarm_size!r}")
        if not (isinstance(self.iterations, int) and self.iterations >= 1):
            raise ValueError(f"iterations must be a positive integer, got {self.iterations!r}")
        if not 0.0 <= self.inertia < 1.0:
            raise ValueError(f"inertia must lie in [0, 1), got {self.inertia}")
        if self.cognitive <= 0 or self.social <= 0:
            raise ValueError("cognitive and social factors must be positive")
        if self.velocity_clamp is not None and self.velocity_clamp <= 0:
            raise ValueError("velocity clamp must be positive when given")


def pso_search(
    context: DesignContext,
    config: PsoConfig,
    initial_positions: Optional[np.ndarray] = None,
    initial_velocities: Optional[np.ndarray] = None,
) -> SearchResult:
    """Particle swarm over integer threshold pairs (L1, L2).

    Particles move in a continuous box [1, K-1]^2 and are rounded to the
    nearest integers for scoring; disordered or out-of-box positions
    score infinity, and a velocity component that carries a particle
    through a wall has its direction reversed for the next step.
    Scores are memoized per integer pair, so `evaluations` counts
    distinct designs scored.  The trajectory is a pure function of the
    seed and the configuration.
    """
    K = context.capacity
    n = config.swarm_size
    clamp = config.velocity_clamp if config.velocity_clamp is not None else K / 4.0
    rng = np.random.Generator(np.random.Philox(config.seed))

    if initial_positions is None:
        pos = np.empty((n, 2))
        for i in range(n):
            pair = rng.choice(np.arange(1, K), size=2, replace=False)
            pair.sort()
            pos[i] = pair
    else:
        pos = np.array(initial_positions, dtype=float)
        if pos.shape != (n, 2):
            raise ValueError(f"initial positions must have shape ({n}, 2), got {pos.shape}")
    if initial_velocities is None:
        vel = (rng.uniform(-clamp / 2, clamp / 2, size=(n, 2))
               if initial_positions is None else np.zeros((n, 2)))
    else:
        vel = np.array(initial_velocities, dtype=float)

    cache: dict[tuple[int, int], DesignEvaluation] = {}
    evaluations = 0

    def score(point: np.ndarray) -> tuple[float, Optional[DesignEvaluation]]:
        nonlocal evaluations
        l1, l2 = int(round(point[0])), int(round(point[1]))
        if not (1 <= l1 < l2 <= K - 1):
            return math.inf, None
        key = (l1, l2)
        if key not in cache:
            cache[key] = evaluate_design(key, context)
            evaluations += 1
        ev = cache[key]
        return ev.objective, ev

    best_eval: Optional[DesignEvaluation] = None
    pbest_pos = pos.copy()
    pbest_val = np.empty(n)
    gbest_pos = pos[0].copy()
    gbest_val = math.inf
    for i in range(n):
        value, ev = score(pos[i])
        pbest_val[i] = value
        if value < gbest_val:
            gbest_val = value
            gbest_pos = pos[i].copy()
            best_eval = ev

    trace = [(0, gbest_val, int(round(gbest_pos[0])), int(round(gbest_pos[1])))]
    for iteration in range(1, config.iterations + 1):
        r_cog = rng.uniform(size=(n, 2))
        r_soc = rng.uniform(size=(n, 2))
        vel = (config.inertia * vel
               + config.cognitive * r_cog * (pbest_pos - pos)
               + config.social * r_soc * (gbest_pos - pos))
        np.clip(vel, -clamp, clamp, out=vel)
        pos = pos + vel
        # reverse the increment direction on wall contact
        out = (pos < 1.0) | (pos > K - 1.0)
        vel[out] = -vel[out]
        for i in range(n):
            value, ev = score(pos[i])
            if value < pbest_val[i]:
                pbest_val[i] = value
                pbest_pos[i] = pos[i].copy()
                if value < gbest_val:
                    gbest_val = value
                    gbest_pos = pos[i].copy()
                    best_eval = ev
        trace.append((iteration, gbest_val, int(round(gbest_pos[0])), int(round(gbest_pos[1]))))

    feasible_count = sum(1 for ev in cache.values() if ev.feasible)
    if best_eval is not None and not best_eval.feasible:
        best_eval = None
    return SearchResult(best=best_eval, evaluations=evaluations,
                        feasible_count=feasible_count, trace=tuple(trace))


def write_trace_csv(trace: Sequence[tuple], path) -> None:
    """Search trace rows (iteration, best normalized power, L1, L2)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "best_normalized_power", "best_l1", "best_l2"])
        for row in trace:
            writer.writerow(row)
