"""Fixed-capacity transition store with uniform sampling."""
from __future__ import annotations

import numpy as np

from .errors import ContractViolationError, UsageError
from .validation import check_scalar


class ReplayBuffer:
    """Ring buffer over (state, joint_action, rewards, next_state) rows.

    Storage is allocated lazily from the first transition's shapes; once
    full, new rows overwrite the oldest ones.  Sampling is uniform with
    replacement from the rows currently held and is deterministic given
    the generator passed in.
    """

    def __init__(self, capacity: int):
        check_scalar(capacity, "capacity", low=1, integral=True)
        self.capacity = int(capacity)
        self._ptr = 0
        self._size = 0
        self._states = None
        self._actions = None
        self._rewards = None
        self._next_states = None

    def __len__(self) -> int:
        return self._size

    def _allocate(self, state, action, rewards, next_state):
        self._states = np.empty((self.capacity, state.shape[0]))
        self._actions = np.empty((self.capacity, action.shape[0]))
        self._rewards = np.empty((self.capacity, rewards.shape[0]))
        self._next_states = np.empty((self.capacity, next_state.shape[0]))

    def add(self, state, action, rewards, next_state) -> None:
        state = np.asarray(state, dtype=np.float64).ravel()
        action = np.asarray(action, dtype=np.float64).ravel()
        rewards = np.asarray(rewards, dtype=np.float64).ravel()
        next_state = np.asarray(next_state, dtype=np.float64).ravel()
        if self._states is None:
            self._allocate(state, action, rewards, next_state)
        if state.shape[0] != self._states.shape[1] \
                or action.shape[0] != self._actions.shape[1] \
                or rewards.shape[0] != self._rewards.shape[1] \
                or next_state.shape[0] != self._next_states.shape[1]:
            raise ContractViolationError(
                "transition shapes changed between add() calls")
        self._states[self._ptr] = state
        self._actions[self._ptr] = action
        self._rewards[self._ptr] = rewards
        self._next_states[self._ptr] = next_state
        self._ptr = (self._ptr + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self._size == 0:
            raise UsageError("cannot sample from an empty buffer")
        check_scalar(batch_size, "batch_size", low=1, integral=True)
        idx = rng.integers(self._size, size=int(batch_size))
        return {
            "states": self._states[idx],
            "actions": self._actions[idx],
            "rewards": self._rewards[idx],
            "next_states": self._next_states[idx],
        }

    def next_states(self) -> np.ndarray:
        """View of every stored next-state row (for adjacency search)."""
        if self._size == 0:
            return np.empty((0, 0))
        return self._next_states[:self._size]
