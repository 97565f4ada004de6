"""Design evaluation and the two searches.  The brute-force result is
re-verified by an independent enumeration pass, and the swarm is held to
the enumeration optimum across seeds on the calibrated scenario."""
import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segqueue.channel import ChannelSpec
from segqueue.model import ExponentialService, PoissonArrivals, ThresholdPolicy
from segqueue.power import (
    DesignContext,
    PowerSpec,
    PsoConfig,
    brute_force_search,
    evaluate_design,
    normalized_power,
    pso_search,
)

FREQS = (1.0e8, 1.5e8, 2.0e8)


def make_context(mu1=978.0, capacity=50, delay_bound=0.0012, constraint="queue-only",
                 lam=150.0, channel_rate=1740.0):
    return DesignContext(
        arrivals=PoissonArrivals(lam),
        capacity=capacity,
        services=(ExponentialService(mu1), ExponentialService(1.5 * mu1),
                  ExponentialService(2.0 * mu1)),
        channel=ChannelSpec(channel_rate, 3),
        power=PowerSpec(FREQS),
        delay_bound=delay_bound,
        constraint=constraint,
    )


class TestNormalizedPower:
    def test_all_mass_in_first_region(self):
        pol = ThresholdPolicy(10, (5, 7))
        dist = np.zeros(11)
        dist[:3] = [0.5, 0.3, 0.2]
        assert normalized_power(dist, pol, PowerSpec(FREQS)) == pytest.approx(1.0, abs=1e-14)

    def test_equal_thirds(self):
        pol = ThresholdPolicy(5, (1, 3))
        dist = np.full(6, 1 / 6)
        assert normalized_power(dist, pol, PowerSpec(FREQS)) == pytest.approx(1.5, abs=1e-12)

    def test_scale_factor_cancels(self):
        pol = ThresholdPolicy(5, (1, 3))
        dist = np.array([0.3, 0.2, 0.2, 0.1, 0.1, 0.1])
        base = normalized_power(dist, pol, PowerSpec(FREQS, scale=1.0))
        doubled = normalized_power(dist, pol, PowerSpec(FREQS, scale=2.0))
        assert doubled == base

    def test_region_count_mismatch(self):
        with pytest.raises(ValueError, match="frequencies"):
            normalized_power(np.full(6, 1 / 6), ThresholdPolicy(5, (2,)), PowerSpec(FREQS))

    @given(st.integers(0, 200))
    @settings(max_examples=40)
    def test_bounded_by_frequency_ratio(self, seed):
        rng = np.random.default_rng(seed)
        pol = ThresholdPolicy(12, (3, 8))
        dist = rng.random(13)
        dist /= dist.sum()
        value = normalized_power(dist, pol, PowerSpec(FREQS))
        assert 1.0 - 1e-12 <= value <= FREQS[-1] / FREQS[0] + 1e-12

    def test_frequency_ordering_enforced(self):
        with pytest.raises(ValueError, match="nondecreasing"):
            PowerSpec((2.0e8, 1.0e8, 1.5e8))


class TestEvaluateDesign:
    def test_disordered_thresholds_score_infinity(self):
        ev = evaluate_design((10, 4), make_context())
        assert not ev.feasible
        assert ev.objective == math.inf
        assert "increasing" in ev.reason

    def test_threshold_at_capacity_is_invalid(self):
        ev = evaluate_design((2, 50), make_context())
        assert not ev.feasible

    def test_unbounded_delay_always_feasible(self):
        ev = evaluate_design((5, 9), make_context(delay_bound=math.inf, constraint="system"))
        assert ev.feasible
        assert ev.reason is None

    def test_system_wait_is_the_exact_sum(self):
        ev = evaluate_design((5, 9), make_context(delay_bound=math.inf, constraint="system"))
        assert ev.system_wait == ev.queue_wait + ev.channel_wait

    def test_unstable_channel_is_infeasible_with_reason(self):
        ctx = make_context(channel_rate=300.0, delay_bound=math.inf, constraint="system")
        ev = evaluate_design((5, 9), ctx)
        assert not ev.feasible
        assert ev.channel_wait == math.inf
        assert "unstable" in ev.reason

    def test_queue_only_mode_ignores_channel(self):
        ctx = make_context(channel_rate=300.0, delay_bound=0.0012, constraint="queue-only")
        ev = evaluate_design((2, 49), ctx)
        assert ev.feasible
        assert ev.channel_wait == math.inf

    def test_table_reference_design_attains_the_optimum(self):
        # (2, 49) under the 0.0012 queue-wait bound: feasible, and its
        # normalized power ties the enumeration optimum bit for bit
        ctx = make_context()
        ev = evaluate_design((2, 49), ctx)
        assert ev.feasible
        best = brute_force_search(ctx).best
        assert abs(ev.normalized_power - best.normalized_power) <= 1e-12


class TestBruteForce:
    def test_enumeration_size_at_fifty(self):
        result = brute_force_search(make_context(delay_bound=0.0))
        assert result.evaluations == 50 * 49 // 2 == 1225

    def test_zero_bound_has_no_feasible_design(self):
        result = brute_force_search(make_context(delay_bound=0.0))
        assert result.best is None
        assert "no feasible design" in result.message

    def test_reenumeration_oracle_confirms_minimum(self):
        ctx = make_context(capacity=12, delay_bound=math.inf, constraint="system")
        result = brute_force_search(ctx)
        # independent second pass over the full grid
        best = None
        for pair in combinations(range(1, 13), 2):
            ev = evaluate_design(pair, ctx)
            if ev.feasible and (best is None or ev.normalized_power < best.normalized_power):
                best = ev
        assert result.best.thresholds == best.thresholds
        assert result.best.normalized_power == best.normalized_power

    def test_feasible_set_grows_with_the_bound(self):
        def feasible_set(bound):
            ctx = make_context(capacity=15, delay_bound=bound)
            return {pair for pair in combinations(range(1, 16), 2)
                    if evaluate_design(pair, ctx).feasible}

        small, mid, large = (feasible_set(b) for b in (0.00115, 0.0012, 0.0013))
        assert small <= mid <= large
        assert len(large) > len(small)

    def test_lexicographic_tie_break(self):
        ctx = make_context(capacity=10, delay_bound=math.inf, constraint="system")
        result = brute_force_search(ctx)
        for pair in combinations(range(1, 11), 2):
            ev = evaluate_design(pair, ctx)
            if ev.normalized_power == result.best.normalized_power:
                assert result.best.thresholds <= pair
                break


class TestPsoConfig:
    @pytest.mark.parametrize("kwargs", [
        {"swarm_size": 1}, {"iterations": 0}, {"inertia": 1.0},
        {"cognitive": 0.0}, {"velocity_clamp": -1.0},
    ])
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PsoConfig(**kwargs)


class TestPsoSearch:
    def test_matches_enumeration_across_seeds(self):
        ctx = make_context()
        target = brute_force_search(ctx).best.normalized_power
        hits = 0
        for seed in range(10):
            result = pso_search(ctx, PsoConfig(seed=seed))
            if result.best is not None and abs(result.best.normalized_power - target) < 1e-9:
                hits += 1
        assert hits >= 9

    def test_deterministic_given_seed(self):
        ctx = make_context()
        a = pso_search(ctx, PsoConfig(seed=11))
        b = pso_search(ctx, PsoConfig(seed=11))
        assert a.best.thresholds == b.best.thresholds
        assert a.best.normalized_power == b.best.normalized_power
        assert a.trace == b.trace
        assert a.evaluations == b.evaluations

    def test_swarm_at_optimum_stays_there(self):
        ctx = make_context()
        best = brute_force_search(ctx).best
        n = 8
        positions = np.tile(np.array(best.thresholds, dtype=float), (n, 1))
        result = pso_search(ctx, PsoConfig(swarm_size=n, iterations=20, seed=0),
                            initial_positions=positions,
                            initial_velocities=np.zeros((n, 2)))
        assert result.best.thresholds == best.thresholds
        assert result.evaluations == 1   # one memoized design

    def test_evaluation_budget(self):
        ctx = make_context()
        cfg = PsoConfig(swarm_size=10, iterations=40, seed=3)
        result = pso_search(ctx, cfg)
        assert result.evaluations <= cfg.swarm_size * (cfg.iterations + 1)
        assert result.evaluations < 1225

    def test_no_feasible_design_outcome(self):
        result = pso_search(make_context(delay_bound=0.0), PsoConfig(seed=0, iterations=10))
        assert result.best is None

    def test_trace_tracks_best_power(self):
        result = pso_search(make_context(), PsoConfig(seed=4))
        values = [row[1] for row in result.trace]
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert len(result.trace) == 101
