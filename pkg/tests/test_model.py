"""Domain-type invariants: policies, service laws, arrivals."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from segqueue.model import (
    DeterministicService,
    ExponentialService,
    PoissonArrivals,
    QuadratureService,
    ThresholdPolicy,
    check_services,
)


@st.composite
def policies(draw, max_capacity=60, max_regions=4):
    capacity = draw(st.integers(min_value=2, max_value=max_capacity))
    n_thresholds = draw(st.integers(min_value=0, max_value=min(max_regions - 1, capacity - 1)))
    thresholds = draw(
        st.lists(st.integers(min_value=1, max_value=capacity - 1),
                 min_size=n_thresholds, max_size=n_thresholds, unique=True)
    )
    return ThresholdPolicy(capacity, tuple(sorted(thresholds)))


class TestThresholdPolicy:
    def test_region_boundaries_follow_threshold_list(self):
        pol = ThresholdPolicy(10, (2, 5))
        assert [pol.region_of(i) for i in range(11)] == [1, 1, 1, 2, 2, 2, 3, 3, 3, 3, 3]
        assert pol.region_bounds(1) == (0, 2)
        assert pol.region_bounds(2) == (3, 5)
        assert pol.region_bounds(3) == (6, 10)

    def test_single_region_policy(self):
        pol = ThresholdPolicy(5)
        assert pol.region_count == 1
        assert all(pol.region_of(i) == 1 for i in range(6))

    @pytest.mark.parametrize("thresholds", [(5, 3), (3, 3), (0, 4), (4, 10), (10,)])
    def test_bad_thresholds_rejected(self, thresholds):
        with pytest.raises(ValueError):
            ThresholdPolicy(10, thresholds)

    def test_bad_capacity_rejected(self):
        with pytest.raises(ValueError):
            ThresholdPolicy(0)

    def test_region_of_out_of_range(self):
        with pytest.raises(ValueError):
            ThresholdPolicy(5).region_of(6)

    @given(policies())
    def test_region_of_total_and_monotone(self, pol):
        regions = [pol.region_of(i) for i in range(pol.capacity + 1)]
        assert regions[0] == 1
        assert regions[-1] == pol.region_count
        assert all(b - a in (0, 1) for a, b in zip(regions, regions[1:]))

    @given(policies())
    def test_region_masses_partition(self, pol):
        rng = np.random.default_rng(0)
        vec = rng.random(pol.capacity + 1)
        vec /= vec.sum()
        masses = pol.region_masses(vec)
        assert masses.shape == (pol.region_count,)
        assert masses.sum() == pytest.approx(1.0, abs=1e-12)

    def test_region_index_array_matches_region_of(self):
        pol = ThresholdPolicy(12, (3, 7, 9))
        idx = pol.region_index_array()
        assert all(idx[i] + 1 == pol.region_of(i) for i in range(13))


class TestServiceLaws:
    @pytest.mark.parametrize("svc", [
        ExponentialService(3.0),
        DeterministicService(0.4),
        QuadratureService(0.5, lambda t: 2.0 * math.exp(-2.0 * t)),
    ])
    def test_transform_normalizes_and_differentiates_to_mean(self, svc):
        assert svc.laplace(0.0) == pytest.approx(1.0, abs=1e-10)
        h = 1e-6
        fd_mean = -(svc.laplace(h) - svc.laplace(0.0)) / h
        assert fd_mean == pytest.approx(svc.mean, rel=1e-4)

    def test_exponential_survival_is_memoryless_tail(self):
        svc = ExponentialService(2.0)
        assert svc.survival(0.5) == pytest.approx(math.exp(-1.0))
        assert svc.cdf(0.5) + svc.survival(0.5) == pytest.approx(1.0)

    def test_deterministic_cdf_is_a_step(self):
        svc = DeterministicService(0.25)
        assert svc.cdf(0.2) == 0.0
        assert svc.cdf(0.25) == 1.0
        assert svc.survival(0.3) == 0.0

    def test_quadrature_cdf_integrates_pdf(self):
        svc = QuadratureService(0.5, lambda t: 2.0 * math.exp(-2.0 * t))
        assert svc.cdf(1.0) == pytest.approx(1.0 - math.exp(-2.0), rel=1e-9)

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_bad_parameters_rejected(self, bad):
        with pytest.raises(ValueError):
            ExponentialService(bad)
        with pytest.raises(ValueError):
            DeterministicService(bad)


class TestArrivals:
    def test_rate_recorded(self):
        assert PoissonArrivals(150.0).rate == 150.0

    @pytest.mark.parametrize("bad", [0.0, -2.0, float("nan"), float("inf")])
    def test_bad_rate_rejected(self, bad):
        with pytest.raises(ValueError):
            PoissonArrivals(bad)


def test_check_services_region_count_mismatch():
    pol = ThresholdPolicy(10, (4,))
    with pytest.raises(ValueError, match="2 regions"):
        check_services(pol, [ExponentialService(1.0)])
