"""Concrete training environments.

Two tabular environments are provided:

* ``DigitalEnv`` — a randomly generated dense MDP on which all agents ride
  one shared state/action chain but receive private reward noise.  All
  agents observe the full state (the single coordinate is the state
  index itself).
* ``GridLandmarksEnv`` — agents move on a small grid toward per-agent
  landmarks.  The global coordinates are the concatenated agent
  positions and each agent observes all but one coordinate, so agents
  hold genuinely different partial views.

Both are driven by explicit seed material: the layout/model seed lives in
the spec (structure), while run-time randomness is re-seeded by trainers
through :meth:`seed`, making every fit reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, ContractViolationError, UsageError
from .mdp import (GlobalState, LocalState, ObservationMatrix,
                  TransitionModel, generate_digital_model, sample_next_state)
from .validation import check_choice, check_scalar

DIGITAL = "digital"
GRID_LANDMARKS = "grid_landmarks"
POINT_MASS = "point_mass"
ENV_KINDS = (DIGITAL, GRID_LANDMARKS, POINT_MASS)

_REWARD_BLOCK = 1024  # per-agent uniform noise draws cached per refill


@dataclass(frozen=True)
class EnvSpec:
    """Declarative environment description (what config files carry).

    ``seed`` fixes the generated structure (model tensors, landmark and
    goal layouts); trajectory randomness is seeded separately at fit
    time, so one spec names one environment instance.
    """

    kind: str = DIGITAL
    n_agents: int = 20
    seed: int = 0
    # digital
    n_states: int = 20
    n_actions: int = 2
    reward_high: float = 4.0
    reward_half_width: float = 0.5
    # grid landmarks
    width: int = 3
    height: int = 3
    horizon: int = 50
    step_cost: float = 0.01
    landmark_reward: float = 1.0
    # point mass
    dt: float = 0.1
    goal_box: float = 0.5
    pm_horizon: int = 50

    def validate(self) -> "EnvSpec":
        check_choice(self.kind, "env.kind", ENV_KINDS)
        check_scalar(self.n_agents, "env.n_agents", low=1, integral=True)
        check_scalar(self.seed, "env.seed", low=0, integral=True)
        if self.kind == DIGITAL:
            check_scalar(self.n_states, "env.n_states", low=2, integral=True)
            check_scalar(self.n_actions, "env.n_actions", low=2, integral=True)
            check_scalar(self.reward_high, "env.reward_high", low=0.0,
                         include_low=False)
            check_scalar(self.reward_half_width, "env.reward_half_width",
                         low=0.0)
        elif self.kind == GRID_LANDMARKS:
            check_scalar(self.width, "env.width", low=2, integral=True)
            check_scalar(self.height, "env.height", low=2, integral=True)
            check_scalar(self.horizon, "env.horizon", low=1, integral=True)
            check_scalar(self.step_cost, "env.step_cost", low=0.0)
            check_scalar(self.landmark_reward, "env.landmark_reward",
                         low=0.0, include_low=False)
            # each agent's table enumerates every joint assignment of its
            # observed coordinates; keep that tractable at desk scale
            d = 2 * self.n_agents
            local_states = (self.width * self.height) ** self.n_agents \
                / max(self.width, self.height)
            if local_states > 200_000:
                raise ConfigError(
                    "env: grid_landmarks local state spaces would exceed "
                    f"200000 entries ({int(local_states)}); shrink the grid "
                    "or the number of agents")
            if d < 2:
                raise ConfigError("env.n_agents: need at least one agent")
        else:
            check_scalar(self.dt, "env.dt", low=0.0, include_low=False)
            check_scalar(self.goal_box, "env.goal_box", low=0.0,
                         include_low=False, high=1.0)
            check_scalar(self.pm_horizon, "env.pm_horizon", low=1,
                         integral=True)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "EnvSpec":
        if not isinstance(payload, dict):
            raise ConfigError("env: expected an object")
        unknown = set(payload) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"env: unknown fields {sorted(unknown)}")
        return cls(**payload).validate()

    def build(self):
        """Instantiate the environment this spec describes."""
        self.validate()
        if self.kind == DIGITAL:
            return DigitalEnv.from_spec(self)
        if self.kind == GRID_LANDMARKS:
            return GridLandmarksEnv.from_spec(self)
        from .pointmass import PointMassEnv
        return PointMassEnv.from_spec(self)


# ---------------------------------------------------------------------------
# digital environment
# ---------------------------------------------------------------------------

class DigitalEnv:
    """Shared random MDP chain with private per-agent reward noise.

    All agents observe the full state; the behavior policy supplies one
    action per step and every agent experiences the same (s, a, s')
    triple with its own reward draw.
    """

    is_shared_chain = True

    def __init__(self, model: TransitionModel, spec: EnvSpec | None = None):
        self.model = model
        self.spec = spec
        self.n_agents = model.n_agents
        self.n_states = model.n_states
        self.n_actions = model.n_actions
        self._obs = ObservationMatrix.identity(1)
        self._chain_rng = None
        self._agent_rngs = None
        self._noise_cache = None
        self._noise_ptr = 0
        self.state = None
        self.seed(0)

    @classmethod
    def from_spec(cls, spec: EnvSpec) -> "DigitalEnv":
        model = generate_digital_model(
            n_states=spec.n_states, n_agents=spec.n_agents, seed=spec.seed,
            n_actions=spec.n_actions, reward_high=spec.reward_high,
            reward_half_width=spec.reward_half_width)
        return cls(model, spec=spec)

    # -- run-time randomness ------------------------------------------------
    def seed(self, seed) -> None:
        """Re-seed all trajectory streams (chain plus one per agent)."""
        ss = seed if isinstance(seed, np.random.SeedSequence) \
            else np.random.SeedSequence(seed)
        children = ss.spawn(1 + self.n_agents)
        self._chain_rng = np.random.default_rng(children[0])
        self._agent_rngs = [np.random.default_rng(c) for c in children[1:]]
        self._noise_cache = None
        self._noise_ptr = 0
        self.state = None

    def _next_noise(self) -> np.ndarray:
        if self._noise_ptr == 0:
            h = self.model.reward_half_width
            self._noise_cache = np.stack([
                g.uniform(-h, h, size=_REWARD_BLOCK)
                for g in self._agent_rngs])
        column = self._noise_cache[:, self._noise_ptr]
        self._noise_ptr = (self._noise_ptr + 1) % _REWARD_BLOCK
        return column

    # -- API ----------------------------------------------------------------
    def reset(self) -> int:
        self.state = int(self._chain_rng.integers(self.n_states))
        return self.state

    def step(self, action: int):
        """Advance the shared chain; returns (next_state, rewards, done)."""
        if self.state is None:
            raise UsageError("step() before reset()")
        s = self.state
        next_state = sample_next_state(self.model, s, int(action),
                                       self._chain_rng)
        rewards = self.model.mean_reward[:, s, int(action)].copy()
        if self.model.reward_half_width > 0.0:
            rewards += self._next_noise()
        self.state = next_state
        return next_state, rewards, False

    # -- views used by the adjacency machinery ------------------------------
    def local_state(self, index: int) -> LocalState:
        return LocalState(values=(int(index),), obs=self._obs)

    def local_state_space(self, agent: int = 0) -> list:
        return [self.local_state(s) for s in range(self.n_states)]

    def global_state(self, index: int) -> GlobalState:
        return GlobalState(index=int(index), coords=(int(index),))

    @property
    def max_abs_reward(self) -> float:
        return self.model.max_abs_reward


# ---------------------------------------------------------------------------
# grid landmarks environment
# ---------------------------------------------------------------------------

class GridLandmarksEnv:
    """Agents walk a grid toward private landmarks under partial views.

    Global coordinates are (x_0, y_0, ..., x_{N-1}, y_{N-1}).  Agent ``i``
    observes all coordinates except one (by default coordinate ``i mod d``),
    so different agents index their tables over different local spaces.

    Actions: 0=up(+y), 1=down(-y), 2=left(-x), 3=right(+x).  Moves off the
    edge are no-ops.  An agent earns ``landmark_reward`` once, at the step
    it first stands on its landmark, pays ``-step_cost`` per step before
    that, and is frozen (and reward-free) afterwards.  The episode ends
    when everyone has arrived or the horizon is hit.
    """

    is_shared_chain = False
    n_actions = 4
    _MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))

    def __init__(self, spec: EnvSpec):
        spec.validate()
        if spec.kind != GRID_LANDMARKS:
            raise ConfigError(f"expected grid_landmarks spec, got {spec.kind}")
        self.spec = spec
        self.n_agents = spec.n_agents
        self.width, self.height = spec.width, spec.height
        self.horizon = spec.horizon
        self.d = 2 * self.n_agents
        self.dim_sizes = tuple(
            self.width if k % 2 == 0 else self.height for k in range(self.d))
        layout_rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
        self.landmarks = [
            (int(layout_rng.integers(self.width)),
             int(layout_rng.integers(self.height)))
            for _ in range(self.n_agents)]
        self.obs_matrices = []
        for i in range(self.n_agents):
            dropped = i % self.d
            rows = tuple(k for k in range(self.d) if k != dropped)
            self.obs_matrices.append(ObservationMatrix(rows=rows, d=self.d))
        self._reset_rng = None
        self.positions = None
        self.reached = None
        self.t = 0
        self.done = True
        self.seed(0)

    @classmethod
    def from_spec(cls, spec: EnvSpec) -> "GridLandmarksEnv":
        return cls(spec)

    def seed(self, seed) -> None:
        ss = seed if isinstance(seed, np.random.SeedSequence) \
            else np.random.SeedSequence(seed)
        self._reset_rng = np.random.default_rng(ss)
        self.done = True

    # -- episode driving ----------------------------------------------------
    def reset(self) -> GlobalState:
        self.positions = [
            (int(self._reset_rng.integers(self.width)),
             int(self._reset_rng.integers(self.height)))
            for _ in range(self.n_agents)]
        self.reached = [False] * self.n_agents
        self.t = 0
        self.done = False
        return self.global_state()

    def step(self, actions):
        if self.done:
            raise UsageError("step() on a finished episode; call reset()")
        actions = list(actions)
        if len(actions) != self.n_agents:
            raise ContractViolationError(
                f"expected {self.n_agents} actions, got {len(actions)}")
        rewards = np.zeros(self.n_agents)
        for i, act in enumerate(actions):
            if not 0 <= int(act) < self.n_actions:
                raise ContractViolationError(
                    f"action {act} outside [0, {self.n_actions})")
            if self.reached[i]:
                continue  # frozen at the landmark, no cost either
            if self.positions[i] == self.landmarks[i]:
                # started this step on the landmark: arrival counts now
                rewards[i] = self.spec.landmark_reward
                self.reached[i] = True
                continue
            dx, dy = self._MOVES[int(act)]
            x, y = self.positions[i]
            nx, ny = x + dx, y + dy
            if 0 <= nx < self.width and 0 <= ny < self.height:
                self.positions[i] = (nx, ny)
            if self.positions[i] == self.landmarks[i]:
                rewards[i] = self.spec.landmark_reward
                self.reached[i] = True
            else:
                rewards[i] = -self.spec.step_cost
        self.t += 1
        self.done = all(self.reached) or self.t >= self.horizon
        return self.global_state(), rewards, self.done

    # -- coordinates and views ----------------------------------------------
    def coords(self) -> tuple:
        out = []
        for x, y in self.positions:
            out.extend((x, y))
        return tuple(out)

    def global_state(self) -> GlobalState:
        coords = self.coords()
        index = 0
        for size, value in zip(self.dim_sizes, coords):
            index = index * size + value
        return GlobalState(index=index, coords=coords)

    def observe(self, agent: int, state: GlobalState | None = None) -> LocalState:
        state = self.global_state() if state is None else state
        return self.obs_matrices[agent].observe(state.coords)

    def local_sizes(self, agent: int) -> tuple:
        obs = self.obs_matrices[agent]
        return tuple(self.dim_sizes[r] for r in obs.rows)

    def n_local_states(self, agent: int) -> int:
        return int(np.prod(self.local_sizes(agent)))

    def local_index(self, agent: int, local: LocalState) -> int:
        index = 0
        for size, value in zip(self.local_sizes(agent), local.values):
            index = index * size + value
        return index

    def local_state_space(self, agent: int) -> list:
        """All of agent's local states, in local-index order."""
        obs = self.obs_matrices[agent]
        sizes = self.local_sizes(agent)
        values = [()]
        for size in sizes:
            values = [v + (c,) for v in values for c in range(size)]
        return [LocalState(values=v, obs=obs) for v in values]

    @property
    def max_abs_reward(self) -> float:
        return float(max(self.spec.landmark_reward, self.spec.step_cost))
