"""Composite inter-departure-time law of the segmented queue.

Packets that arrive to a busy queue depart one service after their
predecessor, so that part of the law is a set of atoms at the per-region
mean service times.  Packets that arrive to an empty queue see an idle
gap first; that part is modeled by a two-piece exponential density whose
amplitudes are fitted to the empty-arrival mass and conditional mean.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .model import PoissonArrivals, ServiceSpec, ThresholdPolicy, check_services
from .chain import ChainAnalysis


def effective_mean_service(
    p: np.ndarray, policy: ThresholdPolicy, services: Sequence[ServiceSpec]
) -> float:
    """Stationary mean service time: region masses (disjoint partition,
    state 0 counted with region 1) weighted by the region means."""
    check_services(policy, services)
    masses = policy.region_masses(p)
    means = np.array([svc.mean for svc in services])
    return float(np.dot(masses, means))


def interdeparture_components(p0: float, lam: float, t_e: float) -> tuple[float, float, float]:
    """Conditional mean inter-departure times (nonempty A, empty B) and
    their mixture, which collapses to 1/lam identically."""
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"empty-arrival probability must lie strictly in (0, 1), got {p0}")
    if lam <= 0 or t_e <= 0:
        raise ValueError(f"rates and means must be positive, got lam={lam}, t_e={t_e}")
    a = t_e
    b = 1.0 / (p0 * lam) - t_e / p0 + t_e
    total = (1.0 - p0) * a + p0 * b
    return a, b, total


def atom_weights(
    p: np.ndarray,
    policy: ThresholdPolicy,
    services: Sequence[ServiceSpec],
    p0: float,
) -> list[tuple[float, float]]:
    """One atom per region at the region's mean service time; weights are
    the busy region masses normalized by 1 - p0 and sum to one."""
    if not 1.0 - p0 > 0.0:
        raise ValueError("degenerate split: all arrivals find the queue empty (p0 = 1)")
    check_services(policy, services)
    p = np.asarray(p, dtype=float)
    busy = p.copy()
    busy[0] = 0.0
    masses = policy.region_masses(busy)
    means = [svc.mean for svc in services]
    return [(means[k], float(masses[k] / (1.0 - p0))) for k in range(policy.region_count)]


def _window_integrals(beta: float, t0: float, t1: float) -> tuple[float, float]:
    """(mass, first moment) of exp(-beta t) over [t0, t1]."""
    mass = (math.exp(-beta * t0) - math.exp(-beta * t1)) / beta
    moment = (math.exp(-beta * t0) * (t0 + 1.0 / beta)
              - math.exp(-beta * t1) * (t1 + 1.0 / beta)) / beta
    return mass, moment


def _tail_integrals(alpha: float, t1: float) -> tuple[float, float]:
    """(mass, first moment) of exp(-alpha t) over [t1, inf)."""
    mass = math.exp(-alpha * t1) / alpha
    moment = math.exp(-alpha * t1) * (t1 + 1.0 / alpha) / alpha
    return mass, moment


def empty_component_params(
    lam: float,
    mu_eff: float,
    p0: float,
    t_e: float,
    t0: float,
    t1: float,
) -> tuple[float, float, float, float, bool]:
    """Fit the empty-arrival density amplitudes.

    The density is amp_window * exp(-beta t) on [t0, t1] plus
    amp_tail * exp(-alpha t) on [t1, inf), with alpha = lam and
    beta = 2*lam*mu_eff / (lam + mu_eff).  The two amplitudes solve the
    linear system that pins the total mass to p0 and the first moment to
    p0 times the empty-arrival conditional mean.

    Returns (alpha, beta, amp_window, amp_tail, amplitude_warning); the
    warning flags a negative amplitude, which the fit permits numerically.
    """
    if not 0.0 < t0 < t1:
        raise ValueError(f"window bounds must satisfy 0 < t0 < t1, got t0={t0}, t1={t1}")
    if lam <= 0 or mu_eff <= 0:
        raise ValueError(f"rates must be positive, got lam={lam}, mu_eff={mu_eff}")
    _, b_mean, _ = interdeparture_components(p0, lam, t_e)

    alpha = lam
    beta = 2.0 * lam * mu_eff / (lam + mu_eff)
    w_mass, w_moment = _window_integrals(beta, t0, t1)
    t_mass, t_moment = _tail_integrals(alpha, t1)
    system = np.array([[w_mass, t_mass], [w_moment, t_moment]])
    rhs = np.array([p0, p0 * b_mean])
    det = float(np.linalg.det(system))
    if abs(det) < 1e-300 or not math.isfinite(det):
        raise ValueError(f"singular amplitude system (determinant {det:.3e})")
    amp_window, amp_tail = np.linalg.solve(system, rhs)
    warn = bool(amp_window < 0.0 or amp_tail < 0.0)
    return alpha, beta, float(amp_window), float(amp_tail), warn


@dataclass(frozen=True)
class DepartureModel:
    """Inter-departure-time law: atoms for nonempty arrivals plus the
    fitted two-piece exponential density for empty arrivals.

    `atom_masses` are unconditional and sum to 1 - empty_probability;
    the density integrates to empty_probability.
    """

    arrival_rate: float
    empty_probability: float
    nonempty_mean: float          # effective mean service time t_E
    empty_mean: float             # conditional mean for empty arrivals
    atom_times: tuple[float, ...]
    atom_masses: tuple[float, ...]
    alpha: float
    beta: float
    window_start: float           # t0
    window_split: float           # t1
    amp_window: float
    amp_tail: float
    amplitude_warning: bool = False

    @property
    def mean(self) -> float:
        """Mixture mean of the two conditional components; equals one
        inter-arrival time identically."""
        return ((1.0 - self.empty_probability) * self.nonempty_mean
                + self.empty_probability * self.empty_mean)

    def laplace(self, s: float) -> float:
        """Transform of the composite law at s >= 0."""
        if s < 0:
            raise ValueError(f"transform argument must be nonnegative, got {s}")
        total = 0.0
        for t, w in zip(self.atom_times, self.atom_masses):
            total += w * math.exp(-s * t)
        total += self.amp_window * (
            math.exp(-(s + self.beta) * self.window_start)
            - math.exp(-(s + self.beta) * self.window_split)
        ) / (s + self.beta)
        total += self.amp_tail * math.exp(-(s + self.alpha) * self.window_split) / (s + self.alpha)
        return total

    def empty_density(self, t: float) -> float:
        """Unconditional density of the empty-arrival component."""
        if self.window_start <= t < self.window_split:
            return self.amp_window * math.exp(-self.beta * t)
        if t >= self.window_split:
            return self.amp_tail * math.exp(-self.alpha * t)
        return 0.0

    def empty_cdf(self, t: float) -> float:
        """CDF of the empty-arrival component normalized to one."""
        if t <= self.window_start:
            return 0.0
        mass = self.amp_window * _window_integrals(self.beta, self.window_start,
                                                   min(t, self.window_split))[0]
        if t > self.window_split:
            mass += self.amp_tail * (math.exp(-self.alpha * self.window_split)
                                     - math.exp(-self.alpha * t)) / self.alpha
        return mass / self.empty_probability

    def to_record(self) -> dict:
        record = asdict(self)
        record["atom_times"] = list(self.atom_times)
        record["atom_masses"] = list(self.atom_masses)
        return record

    @classmethod
    def from_record(cls, record: dict) -> "DepartureModel":
        data = dict(record)
        data["atom_times"] = tuple(data["atom_times"])
        data["atom_masses"] = tuple(data["atom_masses"])
        return cls(**data)


def departure_laplace(model: DepartureModel, s: float) -> float:
    return model.laplace(s)


DEFAULT_WINDOW_SPLIT = 0.011  # seconds; scenario-specific, tune per deployment


def build_departure_model(
    p: np.ndarray,
    policy: ThresholdPolicy,
    services: Sequence[ServiceSpec],
    arrivals: PoissonArrivals,
    *,
    window_split: float = DEFAULT_WINDOW_SPLIT,
    window_start: Optional[float] = None,
    mu_eff: Optional[float] = None,
    empty_probability: Optional[float] = None,
) -> DepartureModel:
    """Assemble the composite law from a post-departure distribution.

    By default the empty-arrival probability is the post-departure mass
    at zero; pass `empty_probability` (e.g. the arbitrary-epoch idle
    mass) to override.  `window_start` defaults to the region-1 mean
    service time and `mu_eff` to the reciprocal of the effective mean
    service time.
    """
    check_services(policy, services)
    p = np.asarray(p, dtype=float)
    lam = arrivals.rate
    p0 = float(p[0]) if empty_probability is None else float(empty_probability)
    t_e = effective_mean_service(p, policy, services)
    _, b_mean, _ = interdeparture_components(p0, lam, t_e)

    t0 = services[0].mean if window_start is None else window_start
    rate_eff = (1.0 / t_e) if mu_eff is None else mu_eff
    alpha, beta, amp_window, amp_tail, warn = empty_component_params(
        lam, rate_eff, p0, t_e, t0, window_split
    )
    # conditional mix always comes from the vector's own busy mass; an
    # overridden empty probability only rescales the two-part split
    atoms = atom_weights(p, policy, services, float(p[0]))
    return DepartureModel(
        arrival_rate=lam,
        empty_probability=p0,
        nonempty_mean=t_e,
        empty_mean=b_mean,
        atom_times=tuple(t for t, _ in atoms),
        atom_masses=tuple((1.0 - p0) * w for _, w in atoms),
        alpha=alpha,
        beta=beta,
        window_start=t0,
        window_split=window_split,
        amp_window=amp_window,
        amp_tail=amp_tail,
        amplitude_warning=warn,
    )


def model_from_analysis(
    analysis: ChainAnalysis,
    services: Sequence[ServiceSpec],
    arrivals: PoissonArrivals,
    **kwargs,
) -> DepartureModel:
    return build_departure_model(
        analysis.post_departure, analysis.policy, services, arrivals, **kwargs
    )
