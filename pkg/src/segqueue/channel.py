"""Channel-access waiting time for a device on a cyclically polled TDMA
channel, abstracted as a G/M/1 queue fed by the device's departure
process and served at the per-queue attended rate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .departure import DepartureModel


class UnstableChannelError(ValueError):
    """Raised when the offered load reaches the per-queue channel rate."""


@dataclass(frozen=True)
class ChannelSpec:
    """Channel packet rate and the number of queues sharing it."""

    rate: float
    queues: int = 3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"channel rate must be a positive finite number, got {self.rate!r}")
        if not (isinstance(self.queues, int) and self.queues >= 1):
            raise ValueError(f"queue count must be a positive integer, got {self.queues!r}")

    @property
    def per_queue_rate(self) -> float:
        return self.rate / self.queues


@dataclass(frozen=True)
class ChannelResult:
    sigma: float
    wait: float
    iterations: int
    method: str


def channel_wait(sigma: float, per_queue_rate: float) -> float:
    """Mean queue wait sigma / ((1 - sigma) * mu_c) of the G/M/1 model."""
    if not 0.0 <= sigma < 1.0:
        raise ValueError(f"sigma must lie in [0, 1), got {sigma}")
    if per_queue_rate <= 0:
        raise ValueError(f"per-queue rate must be positive, got {per_queue_rate}")
    return sigma / ((1.0 - sigma) * per_queue_rate)


def _bisect_sigma(laplace: Callable[[float], float], mu_c: float, tol: float) -> tuple[float, int]:
    # g(sigma) = L(mu_c (1 - sigma)) - sigma; g(0) > 0 and, for a stable
    # queue, g(1-) < 0, so a plain bisection brackets the interior root.
    lo, hi = 0.0, 1.0 - 1e-9
    g_hi = laplace(mu_c * (1.0 - hi)) - hi
    if g_hi >= 0.0:
        raise UnstableChannelError(
            "no interior fixed point: offered load reaches the per-queue channel rate"
        )
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if laplace(mu_c * (1.0 - mid)) - mid > 0.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return 0.5 * (lo + hi), iterations


def solve_sigma(
    source: Union[DepartureModel, Callable[[float], float]],
    per_queue_rate: float,
    *,
    arrival_rate: Optional[float] = None,
    tol: float = 1e-12,
    max_iterations: int = 10_000,
) -> ChannelResult:
    """Root of sigma = L(mu_c * (1 - sigma)) in (0, 1).

    `source` is a departure model or any inter-arrival transform callable.
    Runs the fixed-point iteration from 0.5; if it has not converged
    within the cap (e.g. it cycles), falls back to bisection on the
    residual.  Raises UnstableChannelError when the mean arrival rate is
    not below the per-queue rate.
    """
    if isinstance(source, DepartureModel):
        laplace = source.laplace
        if arrival_rate is None:
            arrival_rate = source.arrival_rate
    else:
        laplace = source
    if arrival_rate is not None and arrival_rate >= per_queue_rate:
        raise UnstableChannelError(
            f"unstable channel: arrival rate {arrival_rate} >= per-queue rate {per_queue_rate}"
        )

    sigma = 0.5
    for iteration in range(1, max_iterations + 1):
        nxt = laplace(per_queue_rate * (1.0 - sigma))
        if abs(nxt - sigma) < tol:
            sigma = nxt
            return ChannelResult(sigma, channel_wait(sigma, per_queue_rate), iteration, "fixed-point")
        sigma = nxt

    sigma, iterations = _bisect_sigma(laplace, per_queue_rate, tol)
    if not 0.0 < sigma < 1.0:
        raise UnstableChannelError(f"fixed point {sigma} outside (0, 1)")
    return ChannelResult(sigma, channel_wait(sigma, per_queue_rate),
                         max_iterations + iterations, "bisection")
