from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """FIFO ring of (state, action, reward, next_state, done) with uniform sampling.

    Storage grows geometrically up to ``capacity`` so that a large nominal
    capacity does not allocate memory up front.
    """

    def __init__(self, state_dim: int, action_dim: int, capacity: int = 1_000_000, initial: int = 1024):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.capacity = int(capacity)
        self.ptr = 0
        self.size = 0
        self._alloc(min(initial, self.capacity))

    def _alloc(self, n):
        self.obs = np.zeros((n, self.state_dim))
        self.act = np.zeros((n, self.action_dim))
        self.rew = np.zeros(n)
        self.next_obs = np.zeros((n, self.state_dim))
        self.done = np.zeros(n)

    def _grow(self):
        n = min(2 * len(self.rew), self.capacity)
        old = (self.obs, self.act, self.rew, self.next_obs, self.done)
        self._alloc(n)
        for dst, src in zip((self.obs, self.act, self.rew, self.next_obs, self.done), old):
            dst[: len(src)] = src

    def __len__(self):
        return self.size

    def store(self, obs, act, rew, next_obs, done):
        if self.ptr >= len(self.rew) and len(self.rew) < self.capacity:
            self._grow()
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return {"obs": self.obs[idx], "act": self.act[idx], "rew": self.rew[idx],
                "next_obs": self.next_obs[idx], "done": self.done[idx]}

    def state(self) -> dict:
        n = self.size
        return {"obs": self.obs[:n].copy(), "act": self.act[:n].copy(), "rew": self.rew[:n].copy(),
                "next_obs": self.next_obs[:n].copy(), "done": self.done[:n].copy(),
                "ptr": np.array(self.ptr), "size": np.array(self.size)}

    def load_state(self, st: dict):
        n = int(st["size"])
        cap = max(1, min(self.capacity, max(n, 1024)))
        self._alloc(cap)
        for name in ("obs", "act", "rew", "next_obs", "done"):
            getattr(self, name)[:n] = st[name]
        self.size = n
        self.ptr = int(st["ptr"])
