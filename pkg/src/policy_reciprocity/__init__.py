"""Multi-agent tabular and actor-critic Q-learning with pooled targets.

Agents blend their own temporal-difference updates with value estimates
pooled from neighboring agents and from states adjacent to the one being
updated, trading a little bias for a large variance reduction.  The
package provides the tabular learners, a small actor-critic extension
for continuous control, reference environments, exact-solver oracles,
and a JSON-config CLI harness (``prx``).
"""
from .adjacency import (AdjacencyConfig, AdjacencySpace, ADJACENCY_MODES,
                        adjacency_weights, build_adjacency_space,
                        l0_distance, q_sharp)
from .config import ALGORITHMS, ExperimentConfig
from .deep import DeepPR, deep_aggregate
from .environments import (DigitalEnv, EnvSpec, GridLandmarksEnv)
from .errors import (ConfigError, ContractViolationError, DivergenceError,
                     EmptyNeighborhoodError, NoAdjacentStateError,
                     NotFittedError, UsageError)
from .graphs import ConnectivityGraph, GRAPH_MODES
from .mdp import (LocalState, ObservationMatrix, QTable, TransitionModel,
                  generate_digital_model, load_model, save_model)
from .oracle import (OracleQ, averaged_bellman, boltzmann_distribution,
                     consensus_error, kappa_one_gap, policy_distribution_mse,
                     value_iteration_averaged)
from .pointmass import PointMassEnv
from .schedules import ScheduleConfig, alpha_at, beta_at
from .tabular import IQLearner, TabularPR, iql_update, pr_update, q_star

__version__ = "0.1.0"

__all__ = [
    "ADJACENCY_MODES", "ALGORITHMS", "AdjacencyConfig", "AdjacencySpace",
    "ConfigError", "ConnectivityGraph", "ContractViolationError", "DeepPR",
    "DigitalEnv", "DivergenceError", "EmptyNeighborhoodError", "EnvSpec",
    "ExperimentConfig", "GRAPH_MODES", "GridLandmarksEnv", "IQLearner",
    "LocalState", "NoAdjacentStateError", "NotFittedError",
    "ObservationMatrix", "OracleQ", "PointMassEnv", "QTable",
    "ScheduleConfig", "TabularPR", "TransitionModel", "UsageError",
    "adjacency_weights", "alpha_at", "averaged_bellman", "beta_at",
    "boltzmann_distribution", "build_adjacency_space", "consensus_error",
    "deep_aggregate", "generate_digital_model", "iql_update",
    "kappa_one_gap", "l0_distance", "load_model", "policy_distribution_mse",
    "pr_update", "q_sharp", "q_star", "save_model", "value_iteration_averaged",
]
