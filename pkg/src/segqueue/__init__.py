"""Analysis, simulation and threshold optimization of queue-length-
dependent service-rate finite queues sharing a polled TDMA channel."""

from .model import (
    DeterministicService,
    ExponentialService,
    PoissonArrivals,
    QuadratureService,
    ServiceSpec,
    ThresholdPolicy,
)
from .chain import (
    ChainAnalysis,
    analyze,
    arbitrary_epoch_distribution,
    arrivals_during_service,
    build_embedded_matrix,
    carried_load,
    mean_departure_interval,
    mean_system_time,
    residual_arrival_probability,
    solve_stationary,
    system_time_lst,
    tail_probability,
)
from .departure import (
    DepartureModel,
    atom_weights,
    build_departure_model,
    departure_laplace,
    effective_mean_service,
    empty_component_params,
    interdeparture_components,
)
from .channel import ChannelResult, ChannelSpec, UnstableChannelError, channel_wait, solve_sigma
from .power import (
    DesignContext,
    DesignEvaluation,
    PowerSpec,
    PsoConfig,
    SearchResult,
    brute_force_search,
    evaluate_design,
    normalized_power,
    pso_search,
)
from .sim import (
    NetworkConfig,
    QueueSimStats,
    SimConfig,
    empirical_interdeparture,
    simulate_network,
    simulate_queue,
)
from .config import Config, ConfigError, default_config, load_config
from .validate import ValidationReport, run_validation

__version__ = "0.1.0"
