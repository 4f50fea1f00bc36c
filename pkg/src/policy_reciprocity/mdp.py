"""Core multi-agent MDP primitives.

The model of interest is a finite MDP shared by ``N`` agents: one controlled
state process, per-agent reward channels.  Each agent sees the global
coordinate vector through a 0/1 row-selection observation matrix, so agents
may live on different (partial) views of the same underlying state.

Global states are enumerable integers; coordinate vectors exist only to
drive observation matrices and partial-view comparisons.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolationError
from .validation import as_generator, check_row_stochastic, check_scalar

MODEL_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# state / observation types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GlobalState:
    """A global state: enumeration index plus its coordinate vector."""

    index: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if self.index < 0:
            raise ContractViolationError(
                f"GlobalState.index must be >= 0, got {self.index}")


@dataclass(frozen=True)
class ObservationMatrix:
    """Row-selection of global coordinates: one selected column per row.

    ``rows`` holds the selected column indices in strictly increasing
    order, so the matrix is a 0/1 matrix with exactly one 1 per row and
    at most one 1 per column.  ``d`` is the number of global coordinates.
    """

    rows: tuple[int, ...]
    d: int

    def __post_init__(self):
        if self.d <= 0:
            raise ContractViolationError(
                f"ObservationMatrix.d must be positive, got {self.d}")
        if len(self.rows) == 0:
            raise ContractViolationError(
                "ObservationMatrix must select at least one coordinate")
        prev = -1
        for r in self.rows:
            if not 0 <= r < self.d:
                raise ContractViolationError(
                    f"ObservationMatrix row {r} outside [0, {self.d})")
            if r <= prev:
                raise ContractViolationError(
                    "ObservationMatrix rows must be strictly increasing, "
                    f"got {self.rows}")
            prev = r

    @property
    def n_observed(self) -> int:
        return len(self.rows)

    def observe(self, coords: tuple[int, ...]) -> "LocalState":
        """Project a global coordinate vector onto this view."""
        if len(coords) != self.d:
            raise ContractViolationError(
                f"coords has length {len(coords)}, observation matrix "
                f"expects {self.d}")
        return LocalState(values=tuple(coords[r] for r in self.rows), obs=self)

    @classmethod
    def identity(cls, d: int) -> "ObservationMatrix":
        return cls(rows=tuple(range(d)), d=d)


@dataclass(frozen=True)
class LocalState:
    """An agent-local state: observed coordinate values plus their view."""

    values: tuple[int, ...]
    obs: ObservationMatrix

    def __post_init__(self):
        if len(self.values) != self.obs.n_observed:
            raise ContractViolationError(
                f"LocalState has {len(self.values)} values for an "
                f"observation matrix selecting {self.obs.n_observed} rows")


def lift(local: LocalState) -> tuple:
    """Embed a local state back into global coordinates.

    Returns a length-``d`` tuple with the observed coordinates filled in
    and unobserved coordinates marked ``None``.  The sentinel is explicit
    on purpose: an unobserved coordinate is *absent*, not zero, and the
    partial-view distance treats it accordingly.
    """
    out = [None] * local.obs.d
    for value, row in zip(local.values, local.obs.rows):
        out[row] = value
    return tuple(out)


def unlift(vector: tuple, obs: ObservationMatrix) -> LocalState:
    """Inverse of :func:`lift` for vectors produced under the same view."""
    if len(vector) != obs.d:
        raise ContractViolationError(
            f"lifted vector has length {len(vector)}, expected {obs.d}")
    values = []
    for row in obs.rows:
        if vector[row] is None:
            raise ContractViolationError(
                f"lifted vector is missing observed coordinate {row}")
        values.append(vector[row])
    return LocalState(values=tuple(values), obs=obs)


# ---------------------------------------------------------------------------
# transition model
# ---------------------------------------------------------------------------

@dataclass
class TransitionModel:
    """Tabular model: transition tensor plus per-agent mean rewards.

    probs : float64 [S, A, S]
        ``probs[s, a]`` is the next-state distribution.
    mean_reward : float64 [N, S, A]
        Per-agent expected instantaneous rewards.
    reward_half_width : float >= 0
        Instantaneous rewards are mean + uniform(-h, +h) noise, drawn
        independently per agent.
    """

    probs: np.ndarray
    mean_reward: np.ndarray
    reward_half_width: float = 0.0
    _cum_probs: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.mean_reward = np.asarray(self.mean_reward, dtype=np.float64)
        if self.probs.ndim != 3 or self.probs.shape[0] != self.probs.shape[2]:
            raise ContractViolationError(
                f"probs must have shape [S, A, S], got {self.probs.shape}")
        if self.mean_reward.ndim != 3:
            raise ContractViolationError(
                f"mean_reward must have shape [N, S, A], "
                f"got {self.mean_reward.shape}")
        if self.mean_reward.shape[1:] != self.probs.shape[:2]:
            raise ContractViolationError(
                f"mean_reward shape {self.mean_reward.shape} does not match "
                f"probs shape {self.probs.shape}")
        if not np.all(np.isfinite(self.mean_reward)):
            raise ContractViolationError("mean_reward contains non-finite entries")
        check_row_stochastic(self.probs, "probs")
        check_scalar(self.reward_half_width, "reward_half_width", low=0.0)
        self._cum_probs = np.cumsum(self.probs, axis=-1)
        # guard against cumulative rounding: the last entry is exactly 1
        self._cum_probs[..., -1] = 1.0

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    @property
    def n_agents(self) -> int:
        return self.mean_reward.shape[0]

    @property
    def max_abs_reward(self) -> float:
        """Upper bound on |instantaneous reward| over agents and pairs."""
        return float(np.max(np.abs(self.mean_reward)) + self.reward_half_width)


@dataclass
class QTable:
    """One agent's action-value table plus per-pair visit counts."""

    values: np.ndarray
    visits: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ContractViolationError(
                f"QTable.values must be 2-D [S, A], got shape "
                f"{self.values.shape}")
        if self.visits is None:
            self.visits = np.zeros(self.values.shape, dtype=np.int64)
        else:
            self.visits = np.asarray(self.visits)
            if self.visits.shape != self.values.shape:
                raise ContractViolationError(
                    "QTable.visits shape must match values shape")
            if np.any(self.visits < 0):
                raise ContractViolationError("QTable.visits must be >= 0")

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_next_state(model: TransitionModel, state: int, action: int,
                      rng: np.random.Generator) -> int:
    """Draw s' ~ probs[s, a] by inverse CDF on one uniform draw."""
    if not 0 <= state < model.n_states:
        raise ContractViolationError(f"state {state} outside [0, {model.n_states})")
    if not 0 <= action < model.n_actions:
        raise ContractViolationError(
            f"action {action} outside [0, {model.n_actions})")
    u = rng.random()
    return int(np.searchsorted(model._cum_probs[state, action], u, side="right"))


def sample_rewards(model: TransitionModel, state: int, action: int,
                   agent_rngs) -> np.ndarray:
    """Draw each agent's instantaneous reward from its own stream."""
    means = model.mean_reward[:, state, action]
    h = model.reward_half_width
    if h == 0.0:
        return means.copy()
    noise = np.array([g.uniform(-h, h) for g in agent_rngs])
    if noise.shape != means.shape:
        raise ContractViolationError(
            f"expected {means.shape[0]} agent streams, got {noise.shape[0]}")
    return means + noise


def sample_transition(model: TransitionModel, state: int, action: int,
                      rng: np.random.Generator, agent_rngs=None):
    """One environment transition: (next_state, rewards[N]).

    ``rng`` drives the state chain; ``agent_rngs`` (one Generator per
    agent) drive the private reward noise.  When ``agent_rngs`` is omitted
    all noise is drawn from ``rng`` (single-stream convenience).
    """
    next_state = sample_next_state(model, state, action, rng)
    if agent_rngs is None:
        agent_rngs = [rng] * model.n_agents
    rewards = sample_rewards(model, state, action, agent_rngs)
    return next_state, rewards


# ---------------------------------------------------------------------------
# model generation and serialization
# ---------------------------------------------------------------------------

def generate_digital_model(n_states: int, n_agents: int, seed,
                           n_actions: int = 2,
                           reward_high: float = 4.0,
                           reward_half_width: float = 0.5) -> TransitionModel:
    """Random dense model: uniform transition rows, uniform mean rewards.

    Transition rows are drawn entrywise uniform on [0, 1] and normalized;
    mean rewards are uniform on [0, reward_high].
    """
    check_scalar(n_states, "n_states", low=2, integral=True)
    check_scalar(n_agents, "n_agents", low=1, integral=True)
    check_scalar(n_actions, "n_actions", low=2, integral=True)
    check_scalar(reward_high, "reward_high", low=0.0, include_low=False)
    check_scalar(reward_half_width, "reward_half_width", low=0.0)
    rng = as_generator(seed)
    raw = rng.uniform(0.0, 1.0, size=(n_states, n_actions, n_states))
    probs = raw / raw.sum(axis=-1, keepdims=True)
    mean_reward = rng.uniform(0.0, reward_high,
                              size=(n_agents, n_states, n_actions))
    return TransitionModel(probs=probs, mean_reward=mean_reward,
                           reward_half_width=reward_half_width)


def save_model(model: TransitionModel, path, seed=None) -> None:
    """Write a model to a versioned JSON file (exact float round trip)."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "n_states": model.n_states,
        "n_actions": model.n_actions,
        "n_agents": model.n_agents,
        "seed": seed,
        "reward_half_width": model.reward_half_width,
        "probs": model.probs.tolist(),
        "mean_reward": model.mean_reward.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_model(path) -> TransitionModel:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ConfigError(
            f"model file {path}: unsupported format_version {version!r}")
    model = TransitionModel(
        probs=np.array(payload["probs"], dtype=np.float64),
        mean_reward=np.array(payload["mean_reward"], dtype=np.float64),
        reward_half_width=float(payload["reward_half_width"]),
    )
    expected = (payload["n_states"], payload["n_actions"], payload["n_agents"])
    actual = (model.n_states, model.n_actions, model.n_agents)
    if expected != actual:
        raise ConfigError(
            f"model file {path}: header dims {expected} do not match "
            f"tensors {actual}")
    return model
