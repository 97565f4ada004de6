"""Discrete-event simulation oracle.

Two simulators: a single segmented queue (service law re-chosen from the
system length at every service initiation) and a Q-queue network whose
device output feeds per-queue channel buffers drained by a cyclically
polling TDMA server.

Randomness comes from Philox counter-based generators with one
substream per purpose (arrivals, services, channel slots), spawned from
a single seed, so changing one parameter never perturbs the draws of an
unrelated stream.  A fixed seed reproduces every statistic bit for bit.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats as _stats

from .model import (
    DeterministicService,
    ExponentialService,
    ServiceSpec,
    ThresholdPolicy,
    check_services,
)

_BLOCK = 1 << 16

SLOT_MODES = ("exponential", "deterministic")
FEED_MODES = ("segmented", "poisson")


@dataclass(frozen=True)
class NetworkConfig:
    """TDMA channel layer: Q queues share one server of rate `channel_rate`
    that spends one slot per queue per cycle, even on empty queues."""

    queues: int = 3
    channel_rate: float = 600.0
    slot_mode: str = "exponential"
    feed: str = "segmented"

    def __post_init__(self) -> None:
        if not (isinstance(self.queues, int) and self.queues >= 1):
            raise ValueError(f"queue count must be a positive integer, got {self.queues!r}")
        if not (math.isfinite(self.channel_rate) and self.channel_rate > 0):
            raise ValueError(f"channel rate must be positive, got {self.channel_rate!r}")
        if self.slot_mode not in SLOT_MODES:
            raise ValueError(f"unknown slot mode {self.slot_mode!r}; expected one of {SLOT_MODES}")
        if self.feed not in FEED_MODES:
            raise ValueError(f"unknown feed mode {self.feed!r}; expected one of {FEED_MODES}")


@dataclass(frozen=True)
class SimConfig:
    arrival_rate: float
    policy: ThresholdPolicy
    services: tuple[ServiceSpec, ...]
    horizon: int = 1_000_000          # departures to simulate
    warmup: Optional[int] = None      # departures discarded; default 10% of horizon
    seed: int = 0
    network: Optional[NetworkConfig] = None

    def __post_init__(self) -> None:
        if self.arrival_rate <= 0:
            raise ValueError(f"arrival rate must be positive, got {self.arrival_rate}")
        check_services(self.policy, self.services)
        for svc in self.services:
            if not isinstance(svc, (ExponentialService, DeterministicService)):
                raise ValueError(
                    "the simulator supports exponential and deterministic services only, "
                    f"got {type(svc).__name__}"
                )
        warmup = self.effective_warmup
        if not 0 <= warmup < self.horizon:
            raise ValueError(
                f"need horizon > warmup >= 0, got horizon={self.horizon}, warmup={warmup}"
            )

    @property
    def effective_warmup(self) -> int:
        return self.horizon // 10 if self.warmup is None else self.warmup


def _batch_ci(samples: np.ndarray, batches: int = 32, level: float = 0.95) -> tuple[float, float]:
    """Batch-means mean and half-width; falls back to a degenerate CI for
    tiny samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2 * batches:
        return float(samples.mean()), float("inf")
    usable = samples.size - samples.size % batches
    means = samples[:usable].reshape(batches, -1).mean(axis=1)
    half = float(_stats.t.ppf(0.5 + level / 2, batches - 1) * means.std(ddof=1) / math.sqrt(batches))
    return float(samples.mean()), half


@dataclass
class QueueSimStats:
    arrivals: int
    departures: int
    drops: int
    in_system_end: int
    duration: float
    mean_sojourn: float
    sojourn_halfwidth: float
    sojourns: np.ndarray = field(repr=False)
    interdeparture: np.ndarray = field(repr=False)
    found_empty: np.ndarray = field(repr=False)
    system_length_hist: np.ndarray = field(repr=False)   # fraction of time with n in system
    queue_length_hist: np.ndarray = field(repr=False)    # fraction of time with n waiting
    region_service_counts: np.ndarray
    region_nonempty_counts: np.ndarray

    @property
    def blocking_fraction(self) -> float:
        return self.drops / self.arrivals if self.arrivals else 0.0

    @property
    def throughput(self) -> float:
        return len(self.sojourns) / self.duration

    @property
    def busy_fraction(self) -> float:
        return float(self.system_length_hist[1:].sum())

    @property
    def time_average_system_length(self) -> float:
        return float(np.dot(self.system_length_hist, np.arange(self.system_length_hist.size)))

    @property
    def mean_interdeparture(self) -> float:
        return float(self.interdeparture.mean())


def simulate_queue(config: SimConfig) -> QueueSimStats:
    """Event-driven run of one segmented queue.

    At every service initiation with n in system the service law is the
    one of region_of(n); a packet arriving to a full system (capacity
    K + 1 including the one in service) is dropped.  Departure times
    follow the standard recursion: the later of the packet's arrival and
    its predecessor's departure, plus its own service.
    """
    lam = config.arrival_rate
    policy = config.policy
    K = policy.capacity
    cap = K + 1
    horizon = config.horizon
    warmup = config.effective_warmup
    n_collect = horizon - warmup

    region = policy.region_index_array()          # state -> 0-based region
    means = np.array([svc.mean for svc in config.services])
    is_det = np.array([isinstance(svc, DeterministicService) for svc in config.services])

    arr_ss, svc_ss = np.random.SeedSequence(config.seed).spawn(2)
    arr_gen = np.random.Generator(np.random.Philox(arr_ss))
    svc_gen = np.random.Generator(np.random.Philox(svc_ss))
    arr_buf = arr_gen.exponential(1.0 / lam, _BLOCK)
    svc_buf = svc_gen.exponential(1.0, _BLOCK)
    arr_i = svc_i = 0

    sojourns = np.empty(n_collect)
    interdep = np.empty(n_collect)
    found_empty = np.zeros(n_collect, dtype=bool)
    hist_sys = np.zeros(cap + 1)
    hist_wait = np.zeros(K + 1)
    region_counts = np.zeros(policy.region_count, dtype=np.int64)
    nonempty_counts = np.zeros(policy.region_count, dtype=np.int64)

    waiting: deque = deque()   # (arrival_time, arrived_to_empty)
    t = 0.0
    n = 0
    next_arr = arr_buf[0]
    arr_i = 1
    svc_end = math.inf
    arrivals = departures = drops = 0
    collecting = warmup == 0
    collected = 0
    prev_dep = 0.0
    t_start = 0.0
    last_t = 0.0

    while collected < n_collect:
        if next_arr <= svc_end:
            te = next_arr
            if collecting:
                dt = te - last_t
                hist_sys[n] += dt
                hist_wait[n - 1 if n else 0] += dt
                last_t = te
            arrivals += 1
            if n == cap:
                drops += 1
            else:
                waiting.append((te, n == 0))
                n += 1
                if n == 1:
                    r = region[1]
                    if is_det[r]:
                        dur = means[r]
                    else:
                        dur = svc_buf[svc_i] * means[r]
                        svc_i += 1
                        if svc_i == _BLOCK:
                            svc_buf = svc_gen.exponential(1.0, _BLOCK)
                            svc_i = 0
                    svc_end = te + dur
                    if collecting:
                        region_counts[r] += 1
                        nonempty_counts[r] += not waiting[0][1]
            next_arr = te + arr_buf[arr_i]
            arr_i += 1
            if arr_i == _BLOCK:
                arr_buf = arr_gen.exponential(1.0 / lam, _BLOCK)
                arr_i = 0
        else:
            te = svc_end
            if collecting:
                dt = te - last_t
                hist_sys[n] += dt
                hist_wait[n - 1 if n else 0] += dt
                last_t = te
            n -= 1
            departures += 1
            at, was_empty = waiting.popleft()
            if collecting:
                sojourns[collected] = te - at
                interdep[collected] = te - prev_dep
                found_empty[collected] = was_empty
                collected += 1
            prev_dep = te
            if n > 0:
                r = region[n]
                if is_det[r]:
                    dur = means[r]
                else:
                    dur = svc_buf[svc_i] * means[r]
                    svc_i += 1
                    if svc_i == _BLOCK:
                        svc_buf = svc_gen.exponential(1.0, _BLOCK)
                        svc_i = 0
                svc_end = te + dur
                if collecting:
                    region_counts[r] += 1
                    nonempty_counts[r] += not waiting[0][1]
            else:
                svc_end = math.inf
            if not collecting and departures >= warmup:
                collecting = True
                t_start = te
                last_t = te
                prev_dep = te

    duration = last_t - t_start
    mean_sojourn, halfwidth = _batch_ci(sojourns)
    return QueueSimStats(
        arrivals=arrivals,
        departures=departures,
        drops=drops,
        in_system_end=n,
        duration=duration,
        mean_sojourn=mean_sojourn,
        sojourn_halfwidth=halfwidth,
        sojourns=sojourns,
        interdeparture=interdep,
        found_empty=found_empty,
        system_length_hist=hist_sys / duration,
        queue_length_hist=hist_wait / duration,
        region_service_counts=region_counts,
        region_nonempty_counts=nonempty_counts,
    )


@dataclass
class NetworkSimStats:
    channel_services: int
    duration: float
    mean_channel_wait: float
    channel_wait_halfwidth: float
    channel_waits: np.ndarray = field(repr=False)
    visit_rates: np.ndarray          # per-queue attendance rate
    served_per_queue: np.ndarray
    device_drops: int


def simulate_network(config: SimConfig) -> NetworkSimStats:
    """Q device queues feeding per-queue channel buffers drained by one
    cyclically polling server.

    Every visit consumes one slot (exponential or deterministic with mean
    1/channel_rate) whether or not the attended buffer holds a packet; a
    packet is transmitted only if it is queued when the slot starts.  The
    server sleeps only when every channel buffer is empty and resumes at
    the buffer that receives the next packet, so the Q = 1 case reduces
    to a plain single-server queue.  Channel wait is measured from buffer
    entry to transmission start.  The horizon counts channel services.
    """
    if config.network is None:
        raise ValueError("network simulation requires a NetworkConfig")
    net = config.network
    Q = net.queues
    lam = config.arrival_rate
    policy = config.policy
    K = policy.capacity
    cap = K + 1
    horizon = config.horizon
    warmup = config.effective_warmup
    n_collect = horizon - warmup
    slot_mean = 1.0 / net.channel_rate
    det_slots = net.slot_mode == "deterministic"
    poisson_feed = net.feed == "poisson"

    region = policy.region_index_array()
    means = np.array([svc.mean for svc in config.services])
    is_det = np.array([isinstance(svc, DeterministicService) for svc in config.services])

    streams = np.random.SeedSequence(config.seed).spawn(2 * Q + 1)
    arr_gens = [np.random.Generator(np.random.Philox(s)) for s in streams[:Q]]
    svc_gens = [np.random.Generator(np.random.Philox(s)) for s in streams[Q:2 * Q]]
    chan_gen = np.random.Generator(np.random.Philox(streams[2 * Q]))

    arr_bufs = [g.exponential(1.0 / lam, _BLOCK) for g in arr_gens]
    svc_bufs = [g.exponential(1.0, _BLOCK) for g in svc_gens]
    chan_buf = chan_gen.exponential(slot_mean, _BLOCK)
    arr_is = [1] * Q
    svc_is = [0] * Q
    chan_i = 0

    next_arr = [arr_bufs[q][0] for q in range(Q)]
    svc_end = [math.inf] * Q
    n_dev = [0] * Q
    buffers = [deque() for _ in range(Q)]   # channel-buffer entry times

    waits = np.empty(n_collect)
    visits = np.zeros(Q, dtype=np.int64)
    served = np.zeros(Q, dtype=np.int64)
    device_drops = 0

    t = 0.0
    position = 0
    slot_end = math.inf          # inf while the server sleeps
    slot_start = 0.0
    serving_entry = -1.0         # buffer-entry time of the packet in the slot, <0 if none
    chan_services = 0
    collecting = warmup == 0
    collected = 0
    t_start = 0.0
    last_event = 0.0

    def draw_slot() -> float:
        nonlocal chan_buf, chan_i
        if det_slots:
            return slot_mean
        value = chan_buf[chan_i]
        chan_i += 1
        if chan_i == _BLOCK:
            chan_buf = chan_gen.exponential(slot_mean, _BLOCK)
            chan_i = 0
        return value

    def start_slot(q: int, now: float) -> None:
        nonlocal slot_end, slot_start, serving_entry
        if collecting:
            visits[q] += 1
        slot_start = now
        serving_entry = buffers[q].popleft() if buffers[q] else -1.0
        slot_end = now + draw_slot()

    def push_channel(q: int, now: float) -> None:
        nonlocal position
        buffers[q].append(now)
        if slot_end == math.inf:
            position = q
            start_slot(q, now)

    while collected < n_collect:
        # next event over device arrivals, device service ends, slot end
        te = slot_end
        kind = -1
        queue_idx = -1
        for q in range(Q):
            if next_arr[q] < te:
                te = next_arr[q]
                kind = 0
                queue_idx = q
            if svc_end[q] < te:
                te = svc_end[q]
                kind = 1
                queue_idx = q
        t = te
        last_event = te

        if kind == 0:
            q = queue_idx
            if poisson_feed:
                push_channel(q, te)
            elif n_dev[q] == cap:
                device_drops += 1
            else:
                n_dev[q] += 1
                if n_dev[q] == 1:
                    r = region[1]
                    if is_det[r]:
                        dur = means[r]
                    else:
                        dur = svc_bufs[q][svc_is[q]] * means[r]
                        svc_is[q] += 1
                        if svc_is[q] == _BLOCK:
                            svc_bufs[q] = svc_gens[q].exponential(1.0, _BLOCK)
                            svc_is[q] = 0
                    svc_end[q] = te + dur
            next_arr[q] = te + arr_bufs[q][arr_is[q]]
            arr_is[q] += 1
            if arr_is[q] == _BLOCK:
                arr_bufs[q] = arr_gens[q].exponential(1.0 / lam, _BLOCK)
                arr_is[q] = 0
        elif kind == 1:
            q = queue_idx
            n_dev[q] -= 1
            push_channel(q, te)
            if n_dev[q] > 0:
                r = region[n_dev[q]]
                if is_det[r]:
                    dur = means[r]
                else:
                    dur = svc_bufs[q][svc_is[q]] * means[r]
                    svc_is[q] += 1
                    if svc_is[q] == _BLOCK:
                        svc_bufs[q] = svc_gens[q].exponential(1.0, _BLOCK)
                        svc_is[q] = 0
                svc_end[q] = te + dur
            else:
                svc_end[q] = math.inf
        else:
            # slot end: complete any transmission, advance the poll cycle;
            # sleep when every channel buffer is empty
            if serving_entry >= 0.0:
                served[position] += 1
                chan_services += 1
                if collecting:
                    waits[collected] = slot_start - serving_entry
                    collected += 1
                elif chan_services >= warmup:
                    collecting = True
                    t_start = te
            if any(buffers):
                position = (position + 1) % Q
                start_slot(position, te)
            else:
                slot_end = math.inf
                serving_entry = -1.0

    duration = last_event - t_start if t_start else last_event
    mean_wait, halfwidth = _batch_ci(waits[:collected])
    return NetworkSimStats(
        channel_services=chan_services,
        duration=duration,
        mean_channel_wait=mean_wait,
        channel_wait_halfwidth=halfwidth,
        channel_waits=waits[:collected],
        visit_rates=visits / duration,
        served_per_queue=served,
        device_drops=device_drops,
    )


@dataclass(frozen=True)
class InterdepartureSplit:
    empty_fraction: float
    nonempty_fraction: float
    empty_edges: np.ndarray
    empty_masses: np.ndarray          # sum to empty_fraction
    nonempty_atoms: Optional[list[tuple[float, float]]]   # (value, mass), masses sum to nonempty_fraction
    nonempty_edges: Optional[np.ndarray]
    nonempty_masses: Optional[np.ndarray]


def empirical_interdeparture(
    samples: np.ndarray,
    found_empty: np.ndarray,
    bin_width: float,
    atom_values: Optional[Sequence[float]] = None,
) -> InterdepartureSplit:
    """Split tagged inter-departure samples into the empty-arrival and
    nonempty-arrival empirical laws.

    With `atom_values` given (deterministic services), nonempty samples
    are clustered onto the nearest atom; otherwise they are binned like
    the empty part.  All masses are unconditional, so the two parts sum
    to their tag fractions.
    """
    samples = np.asarray(samples, dtype=float)
    found_empty = np.asarray(found_empty, dtype=bool)
    if samples.size == 0:
        raise ValueError("no inter-departure samples to split")
    if bin_width <= 0:
        raise ValueError(f"bin width must be positive, got {bin_width}")

    total = samples.size
    empty = samples[found_empty]
    nonempty = samples[~found_empty]
    empty_fraction = empty.size / total
    nonempty_fraction = nonempty.size / total

    top = samples.max() + bin_width
    edges = np.arange(0.0, top + bin_width, bin_width)
    empty_masses = np.histogram(empty, bins=edges)[0] / total

    atoms = None
    ne_edges = None
    ne_masses = None
    if atom_values is not None and nonempty.size:
        values = np.asarray(sorted(atom_values), dtype=float)
        idx = np.argmin(np.abs(nonempty[:, None] - values[None, :]), axis=1)
        spread = np.abs(nonempty - values[idx])
        if spread.max() > 1e-9 * max(1.0, values.max()):
            raise ValueError(
                f"nonempty samples stray {spread.max():.3e} from the declared atoms"
            )
        atoms = [(float(v), float(np.count_nonzero(idx == k) / total))
                 for k, v in enumerate(values)]
    else:
        ne_edges = edges
        ne_masses = np.histogram(nonempty, bins=edges)[0] / total

    return InterdepartureSplit(
        empty_fraction=empty_fraction,
        nonempty_fraction=nonempty_fraction,
        empty_edges=edges,
        empty_masses=empty_masses,
        nonempty_atoms=atoms,
        nonempty_edges=ne_edges,
        nonempty_masses=ne_masses,
    )
