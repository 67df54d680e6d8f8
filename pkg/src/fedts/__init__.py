"""Differentially private federated Thompson sampling with distributed exploration."""

from .accountant import PrivacyLedger, epsilon, epsilon_and_order, log_moment
from .domain import Assignment, Domain, Partition, assign_agents, build_grid, partition
from .experiments import ConfigError, ExperimentConfig, preset, run_experiment
from .mechanism import Broadcast, DpParams, aggregate
from .protocol import ProtocolSetup, RoundConfig, RunTrace, run
from .surrogate import FeaturePosterior, KernelSpec, RffMap, sample_rff
from .weights import WeightSchedule, weights

__all__ = [
    "Assignment", "Broadcast", "ConfigError", "Domain", "DpParams", "ExperimentConfig",
    "FeaturePosterior", "KernelSpec", "Partition", "PrivacyLedger", "ProtocolSetup",
    "RffMap", "RoundConfig", "RunTrace", "WeightSchedule", "aggregate", "assign_agents",
    "build_grid", "epsilon", "epsilon_and_order", "log_moment", "partition", "preset",
    "run", "run_experiment", "sample_rff", "weights",
]
