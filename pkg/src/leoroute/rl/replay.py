"""Fixed-capacity FIFO replay buffer over per-link transitions."""
from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, feature_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.features = np.zeros((capacity, feature_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_features = np.zeros((capacity, feature_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0
        self._inserted = 0

    def __len__(self) -> int:
        return self._size

    def add(self, feature, action, reward, next_feature, done) -> None:
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        i = self._next
        self.features[i] = feature
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_features[i] = next_feature
        self.dones[i] = done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self._inserted += 1

    def add_batch(self, features, actions, rewards, next_features, dones) -> None:
        for row in zip(features, actions, rewards, next_features, dones):
            self.add(*row)

    def oldest_index(self) -> int:
        """Insertion counter (0-based) of the oldest retained transition."""
        return self._inserted - self._size

    def sample(self, batch_size: int, rng: np.random.Generator):
        if batch_size > self._size:
            raise ValueError(f"buffer holds {self._size} transitions, asked for {batch_size}")
        idx = rng.integers(0, self._size, size=batch_size)
        return (self.features[idx], self.actions[idx], self.rewards[idx],
                self.next_features[idx], self.dones[idx])
