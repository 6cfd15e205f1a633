"""Bandit policies that exploit historical observations and a fixed
clustering of the arms, with environments, regret bounds and an experiment
harness."""

from .core import ArmStats, ClusterMap, RngStream, cluster_stats, pooled_mean, record
from .classical import ClassicalPolicy, hucb_index, hucbc_cluster_index
from .contextual import ContextualPolicy, HistorySeed, RidgeState, score, solve
from .meta import MetaPolicy
from .harness import AggregateResult, ExperimentConfig, RegretCurve, run_experiment, run_trial

__version__ = "0.1.0"
