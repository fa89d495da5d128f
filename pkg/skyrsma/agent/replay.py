from typing import NamedTuple

import numpy as np

from skyrsma.constants_utils import BadConfig


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self):
        return self.states.shape[0]


class ReplayBuffer:
    """Ring buffer of encoded transitions (state features, head indices, reward, next features, done)."""

    def __init__(self, capacity, state_dim, num_heads, rng=None, seed=None):
        if capacity < 1:
            raise BadConfig("Replay capacity must be positive")
        self.capacity = int(capacity)
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros((self.capacity, num_heads), dtype=int)
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_dim))
        self.dones = np.zeros(self.capacity)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, state, action_indices, reward, next_state, done):
        j = self._next
        self.states[j] = state
        self.actions[j] = action_indices
        self.rewards[j] = reward
        self.next_states[j] = next_state
        self.dones[j] = float(done)
        self._next = (j + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size):
        if batch_size > self.size:
            raise BadConfig("Batch of {} from a buffer holding {}".format(batch_size, self.size))
        idx = self.rng.choice(self.size, batch_size, replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx])
