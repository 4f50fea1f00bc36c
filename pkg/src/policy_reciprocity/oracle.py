"""Independent ground truth and agreement metrics.

The reference solution for the shared-chain setting is the fixed point of
the agent-averaged Bellman optimality operator

    (G Q)(s, a) = mean_i r_i(s, a) + gamma * sum_s' P(s'|s, a) max_a' Q(s', a')

which is a gamma-contraction in the sup norm, so value iteration converges
linearly and the residual sequence itself certifies the contraction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolationError
from .mdp import TransitionModel
from .validation import check_scalar


@dataclass
class OracleQ:
    """Fixed point estimate plus the convergence trace that produced it."""

    values: np.ndarray          # [S, A]
    gamma: float
    iterations: int
    residual: float             # final sup-norm update size
    residuals: np.ndarray       # full sup-norm update trace


def averaged_bellman(model: TransitionModel, q: np.ndarray,
                     gamma: float) -> np.ndarray:
    """One application of the agent-averaged optimality operator."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (model.n_states, model.n_actions):
        raise ContractViolationError(
            f"q has shape {q.shape}, expected "
            f"{(model.n_states, model.n_actions)}")
    r_bar = model.mean_reward.mean(axis=0)
    next_value = q.max(axis=1)
    return r_bar + gamma * (model.probs @ next_value)


def value_iteration_averaged(model: TransitionModel, gamma: float,
                             tol: float = 1e-10,
                             max_iter: int = 100_000) -> OracleQ:
    """Iterate the averaged operator from zero until the update stalls."""
    check_scalar(gamma, "gamma", low=0.0, high=1.0, include_high=False)
    check_scalar(tol, "tol", low=0.0, include_low=False)
    q = np.zeros((model.n_states, model.n_actions))
    residuals = []
    for iteration in range(1, max_iter + 1):
        q_next = averaged_bellman(model, q, gamma)
        residual = float(np.max(np.abs(q_next - q)))
        residuals.append(residual)
        q = q_next
        if residual <= tol:
            return OracleQ(values=q, gamma=gamma, iterations=iteration,
                           residual=residual,
                           residuals=np.asarray(residuals))
    raise ConfigError(
        f"value iteration did not reach tol={tol} in {max_iter} iterations")


# ---------------------------------------------------------------------------
# agreement metrics
# ---------------------------------------------------------------------------

def _stack_tables(tables) -> np.ndarray:
    arrays = []
    for t in tables:
        arr = np.asarray(getattr(t, "values", t), dtype=np.float64)
        arrays.append(arr)
    first = arrays[0].shape
    for arr in arrays[1:]:
        if arr.shape != first:
            raise ContractViolationError(
                "agreement metrics are defined only when all agents share "
                f"one state space; got table shapes {first} and {arr.shape}")
    return np.stack(arrays)


def consensus_error(tables) -> float:
    """Mean over (s, a) of the across-agent variance of table entries."""
    stacked = _stack_tables(tables)
    if stacked.shape[0] < 1:
        raise ContractViolationError("need at least one table")
    mean = stacked.mean(axis=0)
    return float(np.mean((stacked - mean) ** 2))


def boltzmann_distribution(q_row: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax of q / temperature, numerically stabilized."""
    check_scalar(temperature, "temperature", low=0.0, include_low=False)
    z = np.asarray(q_row, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def policy_distribution_mse(tables, temperature: float = 1.0) -> float:
    """Mean squared distance of per-agent action distributions from the
    average distribution, averaged over agents and states.

    The per-(agent, state) contribution is the squared Euclidean distance
    over the action simplex, so two deterministic, opposite two-action
    policies sit at 0.5.
    """
    stacked = _stack_tables(tables)
    dists = boltzmann_distribution(stacked, temperature)
    mean_dist = dists.mean(axis=0)
    per_agent_state = ((dists - mean_dist) ** 2).sum(axis=-1)
    return float(per_agent_state.mean())


def kappa_one_gap(tables_a, tables_b) -> float:
    """Sup-norm distance between two seed-paired families of tables."""
    a = _stack_tables(tables_a)
    b = _stack_tables(tables_b)
    if a.shape != b.shape:
        raise ContractViolationError(
            f"paired table families differ in shape: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b)))
