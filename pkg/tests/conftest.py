"""Shared test helpers."""
import numpy as np

from segqueue.model import (
    DeterministicService,
    ExponentialService,
    PoissonArrivals,
    ThresholdPolicy,
)


def random_instance(seed: int, max_capacity: int = 60):
    """Random scenario in the regime the artifact targets: service rates
    nondecreasing with queue length (frequency scaling speeds up a
    filling buffer) and region-1 utilization in [0.2, 1.3].

    Decreasing rate ladders build metastable two-welled chains whose
    stationary vectors underflow double precision; the solver rejects
    those, so they stay out of the generator.
    """
    rng = np.random.default_rng(seed)
    capacity = int(rng.integers(3, max_capacity))
    n_thresholds = int(rng.integers(0, min(4, capacity - 1)))
    thresholds = tuple(sorted(rng.choice(np.arange(1, capacity), n_thresholds, replace=False)))
    policy = ThresholdPolicy(capacity, thresholds)
    lam = float(rng.uniform(0.5, 30.0))
    rate = lam / float(rng.uniform(0.2, 1.3))
    services = []
    for _ in range(policy.region_count):
        if rng.random() < 0.5:
            services.append(ExponentialService(rate))
        else:
            services.append(DeterministicService(1.0 / rate))
        rate *= float(rng.uniform(1.0, 1.8))
    return policy, services, PoissonArrivals(lam)
