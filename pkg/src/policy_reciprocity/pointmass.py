"""Continuous toy environment for the deep trainer.

N point masses live in the box [-1, 1]^2; agent i is rewarded the negative
Euclidean distance to its private goal.  Goals are drawn once from the
spec seed (inside a smaller centered box so rewards stay well below their
theoretical bound); start positions are drawn per reset.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, ContractViolationError, UsageError


class PointMassEnv:
    is_shared_chain = False
    action_dim = 2

    def __init__(self, n_agents: int, dt: float = 0.1, goal_box: float = 0.5,
                 horizon: int = 50, seed: int = 0, spec=None):
        if n_agents < 1:
            raise ConfigError(f"n_agents must be >= 1, got {n_agents}")
        self.n_agents = int(n_agents)
        self.dt = float(dt)
        self.horizon = int(horizon)
        self.spec = spec
        self.obs_dim = 2 * self.n_agents
        layout_rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.goals = layout_rng.uniform(-goal_box, goal_box,
                                        size=(self.n_agents, 2))
        self._reset_rng = None
        self.positions = None
        self.t = 0
        self.done = True
        self.seed(0)

    @classmethod
    def from_spec(cls, spec) -> "PointMassEnv":
        return cls(n_agents=spec.n_agents, dt=spec.dt,
                   goal_box=spec.goal_box, horizon=spec.pm_horizon,
                   seed=spec.seed, spec=spec)

    def seed(self, seed) -> None:
        ss = seed if isinstance(seed, np.random.SeedSequence) \
            else np.random.SeedSequence(seed)
        self._reset_rng = np.random.default_rng(ss)
        self.done = True

    def observation(self) -> np.ndarray:
        return self.positions.ravel().copy()

    def reset(self) -> np.ndarray:
        self.positions = self._reset_rng.uniform(
            -1.0, 1.0, size=(self.n_agents, 2))
        self.t = 0
        self.done = False
        return self.observation()

    def step(self, actions: np.ndarray):
        if self.done:
            raise UsageError("step() on a finished episode; call reset()")
        actions = np.asarray(actions, dtype=np.float64)
        if actions.size != self.n_agents * 2:
            raise ContractViolationError(
                f"expected {self.n_agents * 2} action values, "
                f"got shape {actions.shape}")
        actions = actions.reshape(self.n_agents, 2)
        if np.any(np.abs(actions) > 1.0 + 1e-12):
            raise ContractViolationError("actions must lie in [-1, 1]")
        self.positions = np.clip(self.positions + self.dt * actions,
                                 -1.0, 1.0)
        rewards = -np.linalg.norm(self.positions - self.goals, axis=1)
        self.t += 1
        self.done = self.t >= self.horizon
        return self.observation(), rewards, self.done

    @property
    def max_abs_reward(self) -> float:
        """Largest distance the box allows (position corner to far goal)."""
        return float(2.0 * np.sqrt(2.0))
