"""Domain types: threshold policies, service-time laws, Poisson arrivals.

All types are frozen dataclasses validated at construction; everything
downstream treats them as immutable values, so they are safe to share
across worker processes or threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, ClassVar, Optional, Sequence, Union

import numpy as np
from scipy import integrate


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


@dataclass(frozen=True)
class PoissonArrivals:
    """Poisson packet arrivals at `rate` packets per second."""

    rate: float

    def __post_init__(self) -> None:
        _require(
            isinstance(self.rate, (int, float)) and math.isfinite(self.rate) and self.rate > 0,
            f"arrival rate must be a positive finite number, got {self.rate!r}",
        )


@dataclass(frozen=True)
class ExponentialService:
    """Exponential service time with the given rate (1/seconds)."""

    rate: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self) -> None:
        _require(
            math.isfinite(self.rate) and self.rate > 0,
            f"service rate must be a positive finite number, got {self.rate!r}",
        )

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def laplace(self, s: float) -> float:
        """Transform E[exp(-s S)] evaluated at s >= 0."""
        return self.rate / (self.rate + s)

    def cdf(self, t: float) -> float:
        return 1.0 - math.exp(-self.rate * t) if t > 0 else 0.0

    def survival(self, t: float) -> float:
        return math.exp(-self.rate * t) if t > 0 else 1.0


@dataclass(frozen=True)
class DeterministicService:
    """Constant service time of `duration` seconds."""

    duration: float
    kind: ClassVar[str] = "deterministic"

    def __post_init__(self) -> None:
        _require(
            math.isfinite(self.duration) and self.duration > 0,
            f"service duration must be a positive finite number, got {self.duration!r}",
        )

    @property
    def mean(self) -> float:
        return self.duration

    def laplace(self, s: float) -> float:
        return math.exp(-s * self.duration)

    def cdf(self, t: float) -> float:
        return 1.0 if t >= self.duration else 0.0

    def survival(self, t: float) -> float:
        return 0.0 if t >= self.duration else 1.0


@dataclass(frozen=True)
class QuadratureService:
    """Service law defined by an arbitrary density; everything is integrated
    numerically (adaptive quadrature, absolute tolerance 1e-12).

    Only the analytical layer accepts this kind; the event simulator requires
    exponential or deterministic laws.
    """

    mean_value: float
    pdf: Callable[[float], float]
    cdf_fn: Optional[Callable[[float], float]] = None
    kind: ClassVar[str] = "quadrature"

    QUAD_TOL: ClassVar[float] = 1e-12

    def __post_init__(self) -> None:
        _require(
            math.isfinite(self.mean_value) and self.mean_value > 0,
            f"service mean must be a positive finite number, got {self.mean_value!r}",
        )

    @property
    def mean(self) -> float:
        return self.mean_value

    def laplace(self, s: float) -> float:
        value, _ = integrate.quad(
            lambda t: math.exp(-s * t) * self.pdf(t), 0.0, np.inf,
            epsabs=self.QUAD_TOL, limit=200,
        )
        return value

    def cdf(self, t: float) -> float:
        if self.cdf_fn is not None:
            return self.cdf_fn(t)
        if t <= 0:
            return 0.0
        value, _ = integrate.quad(self.pdf, 0.0, t, epsabs=self.QUAD_TOL, limit=200)
        return min(value, 1.0)

    def survival(self, t: float) -> float:
        return 1.0 - self.cdf(t)


ServiceSpec = Union[ExponentialService, DeterministicService, QuadratureService]


@dataclass(frozen=True)
class ThresholdPolicy:
    """Buffer capacity plus the ordered thresholds that partition queue
    lengths into service regions.

    `capacity` is the largest post-departure system length K.  The
    thresholds (L_1, ..., L_{T-1}) must satisfy 1 <= L_1 < ... < L_{T-1} < K;
    together with the implicit L_T = K they induce T regions.  Region 1
    covers lengths 0..L_1 and region k covers L_{k-1}+1 .. L_k.
    """

    capacity: int
    thresholds: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        _require(
            isinstance(self.capacity, int) and self.capacity >= 1,
            f"capacity must be a positive integer, got {self.capacity!r}",
        )
        ts = tuple(int(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", ts)
        for t in ts:
            _require(1 <= t < self.capacity,
                     f"threshold {t} outside the valid range [1, {self.capacity - 1}]")
        for lo, hi in zip(ts, ts[1:]):
            _require(lo < hi, f"thresholds must be strictly increasing, got {ts}")

    @property
    def region_count(self) -> int:
        return len(self.thresholds) + 1

    def region_of(self, length: int) -> int:
        """1-based region index of a system length in 0..capacity."""
        _require(0 <= length <= self.capacity,
                 f"length {length} outside the state space 0..{self.capacity}")
        return int(np.searchsorted(self.thresholds, length, side="left")) + 1

    def region_index_array(self) -> np.ndarray:
        """0-based region index for every state 0..capacity."""
        states = np.arange(self.capacity + 1)
        return np.searchsorted(self.thresholds, states, side="left")

    def region_bounds(self, region: int) -> tuple[int, int]:
        """Inclusive state range (lo, hi) covered by a 1-based region."""
        _require(1 <= region <= self.region_count,
                 f"region {region} outside 1..{self.region_count}")
        lo = 0 if region == 1 else self.thresholds[region - 2] + 1
        hi = self.capacity if region == self.region_count else self.thresholds[region - 1]
        return lo, hi

    def region_masses(self, dist: Sequence[float]) -> np.ndarray:
        """Sum a probability vector over the disjoint region partition."""
        vec = np.asarray(dist, dtype=float)
        _require(vec.shape == (self.capacity + 1,),
                 f"distribution must have length {self.capacity + 1}, got {vec.shape}")
        masses = np.empty(self.region_count)
        for k in range(1, self.region_count + 1):
            lo, hi = self.region_bounds(k)
            masses[k - 1] = vec[lo:hi + 1].sum()
        return masses


def check_services(policy: ThresholdPolicy, services: Sequence[ServiceSpec]) -> None:
    """Reject service lists whose region count disagrees with the policy."""
    if len(services) != policy.region_count:
        raise ValueError(
            f"policy defines {policy.region_count} regions but "
            f"{len(services)} service specs were given"
        )
