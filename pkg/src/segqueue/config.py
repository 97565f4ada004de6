"""Scenario configuration: one JSON document per scenario, strictly
validated, with documented defaults for every optional field."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

from .model import (
    DeterministicService,
    ExponentialService,
    PoissonArrivals,
    ServiceSpec,
    ThresholdPolicy,
)
from .channel import ChannelSpec
from .power import PowerSpec, PsoConfig, CONSTRAINT_MODES, POWER_BASES
from .chain import WAIT_VARIANTS
from .sim import SLOT_MODES, FEED_MODES

P0_SOURCES = ("post-departure", "arbitrary-epoch")


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass(frozen=True)
class DepartureOptions:
    window_split: float = 0.011        # t1, seconds; scenario-specific constant
    window_start: Optional[float] = None   # t0; defaults to the region-1 mean service time
    mu_eff: Optional[float] = None         # defaults to 1 / effective mean service time
    empty_probability_source: str = "post-departure"


@dataclass(frozen=True)
class SimOptions:
    horizon: int = 1_000_000
    warmup: Optional[int] = None       # defaults to 10% of horizon
    seed: int = 1
    feed: str = "segmented"


@dataclass(frozen=True)
class Config:
    arrivals: PoissonArrivals
    policy: ThresholdPolicy
    services: tuple[ServiceSpec, ...]
    power: PowerSpec
    channel: ChannelSpec
    slot_mode: str
    delay_bound: float
    constraint: str
    wait_variant: str
    power_basis: str
    departure: DepartureOptions
    pso: PsoConfig
    sim: SimOptions
    output_dir: str


_SERVICE_KEYS = {"kind", "rate", "duration"}


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}; allowed: {sorted(allowed)}")


def _parse_service(entry: Any, where: str) -> ServiceSpec:
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: each service must be an object with a 'kind'")
    _reject_unknown(entry, _SERVICE_KEYS, where)
    kind = entry.get("kind")
    try:
        if kind == "exponential":
            if "rate" not in entry:
                raise ConfigError(f"{where}: exponential service needs a 'rate'")
            return ExponentialService(float(entry["rate"]))
        if kind == "deterministic":
            if "duration" not in entry:
                raise ConfigError(f"{where}: deterministic service needs a 'duration'")
            return DeterministicService(float(entry["duration"]))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown service kind {kind!r}; "
                      f"expected 'exponential' or 'deterministic'")


_TOP_KEYS = {
    "arrival_rate", "capacity", "thresholds", "services", "frequencies",
    "power_scale", "channel", "delay_bound", "constraint", "wait_variant",
    "power_basis", "departure", "pso", "sim", "output_dir",
}
_CHANNEL_KEYS = {"rate", "queues", "slot_mode"}
_DEPARTURE_KEYS = {"window_split", "window_start", "mu_eff", "empty_probability_source"}
_PSO_KEYS = {"swarm_size", "iterations", "inertia", "cognitive", "social",
             "velocity_clamp", "seed"}
_SIM_KEYS = {"horizon", "warmup", "seed", "feed"}


def _choice(value: str, options: tuple[str, ...], where: str) -> str:
    if value not in options:
        raise ConfigError(f"{where}: {value!r} is not one of {options}")
    return value


def config_from_dict(raw: dict) -> Config:
    """Validate a parsed JSON document and assemble the typed config."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration document must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    for key in ("arrival_rate", "capacity", "thresholds", "services"):
        if key not in raw:
            raise ConfigError(f"config.{key}: required field is missing")

    try:
        arrivals = PoissonArrivals(float(raw["arrival_rate"]))
    except ValueError as exc:
        raise ConfigError(f"config.arrival_rate: {exc}") from exc

    thresholds = raw["thresholds"]
    if not isinstance(thresholds, list):
        raise ConfigError("config.thresholds: must be a list of integers")
    try:
        policy = ThresholdPolicy(int(raw["capacity"]), tuple(int(t) for t in thresholds))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.thresholds/capacity: {exc}") from exc

    services_raw = raw["services"]
    if not isinstance(services_raw, list) or not services_raw:
        raise ConfigError("config.services: must be a non-empty list")
    services = tuple(
        _parse_service(entry, f"config.services[{i}]") for i, entry in enumerate(services_raw)
    )
    if len(services) != policy.region_count:
        raise ConfigError(
            f"config.services: {len(thresholds)} thresholds define "
            f"{policy.region_count} regions, so {policy.region_count} service specs "
            f"are required, got {len(services)}"
        )

    frequencies = raw.get("frequencies", [1e8, 1.5e8, 2e8][: policy.region_count])
    if not isinstance(frequencies, list):
        raise ConfigError("config.frequencies: must be a list of numbers")
    try:
        power = PowerSpec(tuple(float(f) for f in frequencies),
                          float(raw.get("power_scale", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"config.frequencies/power_scale: {exc}") from exc
    if len(power.frequencies) != policy.region_count:
        raise ConfigError(
            f"config.frequencies: need one frequency per region "
            f"({policy.region_count}), got {len(power.frequencies)}"
        )

    chan_raw = raw.get("channel", {})
    if not isinstance(chan_raw, dict):
        raise ConfigError("config.channel: must be an object")
    _reject_unknown(chan_raw, _CHANNEL_KEYS, "config.channel")
    try:
        channel = ChannelSpec(float(chan_raw.get("rate", 580.0)),
                              int(chan_raw.get("queues", 3)))
    except ValueError as exc:
        raise ConfigError(f"config.channel: {exc}") from exc
    slot_mode = _choice(chan_raw.get("slot_mode", "deterministic"), SLOT_MODES,
                        "config.channel.slot_mode")

    dep_raw = raw.get("departure", {})
    if not isinstance(dep_raw, dict):
        raise ConfigError("config.departure: must be an object")
    _reject_unknown(dep_raw, _DEPARTURE_KEYS, "config.departure")
    departure = DepartureOptions(
        window_split=float(dep_raw.get("window_split", 0.011)),
        window_start=(None if dep_raw.get("window_start") is None
                      else float(dep_raw["window_start"])),
        mu_eff=None if dep_raw.get("mu_eff") is None else float(dep_raw["mu_eff"]),
        empty_probability_source=_choice(
            dep_raw.get("empty_probability_source", "post-departure"),
            P0_SOURCES, "config.departure.empty_probability_source"),
    )
    if departure.window_split <= 0:
        raise ConfigError("config.departure.window_split: must be positive")

    pso_raw = raw.get("pso", {})
    if not isinstance(pso_raw, dict):
        raise ConfigError("config.pso: must be an object")
    _reject_unknown(pso_raw, _PSO_KEYS, "config.pso")
    try:
        pso = PsoConfig(
            swarm_size=int(pso_raw.get("swarm_size", 20)),
            iterations=int(pso_raw.get("iterations", 100)),
            inertia=float(pso_raw.get("inertia", 0.7)),
            cognitive=float(pso_raw.get("cognitive", 1.5)),
            social=float(pso_raw.get("social", 1.5)),
            velocity_clamp=(None if pso_raw.get("velocity_clamp") is None
                            else float(pso_raw["velocity_clamp"])),
            seed=int(pso_raw.get("seed", 1)),
        )
    except ValueError as exc:
        raise ConfigError(f"config.pso: {exc}") from exc

    sim_raw = raw.get("sim", {})
    if not isinstance(sim_raw, dict):
        raise ConfigError("config.sim: must be an object")
    _reject_unknown(sim_raw, _SIM_KEYS, "config.sim")
    try:
        sim = SimOptions(
            horizon=int(sim_raw.get("horizon", 1_000_000)),
            warmup=None if sim_raw.get("warmup") is None else int(sim_raw["warmup"]),
            seed=int(sim_raw.get("seed", 1)),
            feed=_choice(sim_raw.get("feed", "segmented"), FEED_MODES, "config.sim.feed"),
        )
    except ValueError as exc:
        raise ConfigError(f"config.sim: {exc}") from exc
    if sim.horizon <= 0 or (sim.warmup is not None and not 0 <= sim.warmup < sim.horizon):
        raise ConfigError("config.sim: need horizon > warmup >= 0")

    delay_bound = float(raw.get("delay_bound", math.inf))
    if not delay_bound > 0:
        raise ConfigError("config.delay_bound: must be positive")

    return Config(
        arrivals=arrivals,
        policy=policy,
        services=services,
        power=power,
        channel=channel,
        slot_mode=slot_mode,
        delay_bound=delay_bound,
        constraint=_choice(raw.get("constraint", "system"), CONSTRAINT_MODES,
                           "config.constraint"),
        wait_variant=_choice(raw.get("wait_variant", "inclusive"), WAIT_VARIANTS,
                             "config.wait_variant"),
        power_basis=_choice(raw.get("power_basis", "arbitrary-epoch"), POWER_BASES,
                            "config.power_basis"),
        departure=departure,
        pso=pso,
        sim=sim,
        output_dir=str(raw.get("output_dir", "out")),
    )


def load_config(path: Union[str, Path]) -> Config:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def default_config_dict() -> dict:
    """The calibrated reference scenario used by the validation suite."""
    return {
        "arrival_rate": 150.0,
        "capacity": 50,
        "thresholds": [14, 20],
        "services": [
            {"kind": "exponential", "rate": 200.0},
            {"kind": "exponential", "rate": 300.0},
            {"kind": "exponential", "rate": 400.0},
        ],
        "frequencies": [1.0e8, 1.5e8, 2.0e8],
        "power_scale": 1.0,
        "channel": {"rate": 580.0, "queues": 3, "slot_mode": "deterministic"},
        "delay_bound": 0.030,
        "constraint": "system",
        "wait_variant": "inclusive",
        "power_basis": "arbitrary-epoch",
        "departure": {"window_split": 0.011},
        "pso": {"swarm_size": 20, "iterations": 100, "seed": 1},
        "sim": {"horizon": 1_000_000, "seed": 1},
        "output_dir": "out",
    }


def default_config() -> Config:
    return config_from_dict(default_config_dict())
