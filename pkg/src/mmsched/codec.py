"""Bijection between flat action indices, user subsets and factorised sub-indices.

Subsets of size 1..n_max are ordered by cardinality, then lexicographically,
and ranked with the combinatorial number system so that no table is needed
even when the action count is astronomically large.
"""
from __future__ import annotations

from bisect import bisect_right
from math import comb

import numpy as np


def count_actions(num_users: int, n_max: int) -> int:
    return sum(comb(num_users, i) for i in range(1, n_max + 1))


def rank_combination(combo, n: int) -> int:
    """Lexicographic rank of a sorted k-subset of ``range(n)``."""
    k = len(combo)
    return comb(n, k) - 1 - sum(comb(n - 1 - s, k - i) for i, s in enumerate(combo))


def unrank_combination(rank: int, k: int, n: int) -> tuple[int, ...]:
    out = []
    x = 0
    for i in range(k):
        while True:
            block = comb(n - 1 - x, k - 1 - i)
            if rank < block:
                out.append(x)
                x += 1
                break
            rank -= block
            x += 1
    return tuple(out)


def default_dims(num_actions: int, max_dim_size: int = 256) -> tuple[int, int]:
    """Fewest dimensions D whose per-dimension size ceil(A^(1/D)) fits ``max_dim_size``."""
    d = 1
    while True:
        size = _int_root_ceil(num_actions, d)
        if size <= max_dim_size:
            return d, size
        d += 1


def _int_root_ceil(a: int, d: int) -> int:
    s = max(1, int(round(a ** (1.0 / d))))
    while s ** d < a:
        s += 1
    while s > 1 and (s - 1) ** d >= a:
        s -= 1
    return s


class ActionCodec:
    """Flat index <-> user subset <-> mixed-radix sub-indices.

    ``dim_sizes`` factorises the action range (least-significant dimension
    first); joined indices at or beyond ``num_actions`` clamp to the last one.
    """

    def __init__(self, num_users: int, n_max: int, dim_sizes=None, num_dims=None, max_dim_size=256):
        if not 1 <= n_max <= num_users:
            raise ValueError(f"n_max must lie in [1, {num_users}], got {n_max}")
        self.num_users = num_users
        self.n_max = n_max
        self.offsets = [0]
        for c in range(1, n_max + 1):
            self.offsets.append(self.offsets[-1] + comb(num_users, c))
        self.num_actions = self.offsets[-1]
        if dim_sizes is None:
            if num_dims is None:
                num_dims, size = default_dims(self.num_actions, max_dim_size)
            else:
                size = _int_root_ceil(self.num_actions, num_dims)
            dim_sizes = (size,) * num_dims
        self.dim_sizes = tuple(int(s) for s in dim_sizes)
        if any(s < 1 for s in self.dim_sizes):
            raise ValueError(f"dimension sizes must be positive, got {self.dim_sizes}")
        self.capacity = int(np.prod(self.dim_sizes, dtype=object))
        if self.capacity < self.num_actions:
            raise ValueError(f"dimension sizes {self.dim_sizes} cover {self.capacity} < {self.num_actions} actions")

    @property
    def num_dims(self) -> int:
        return len(self.dim_sizes)

    def index_to_subset(self, k: int) -> tuple[int, ...]:
        k = int(k)
        if not 0 <= k < self.num_actions:
            raise ValueError(f"action index {k} out of range [0, {self.num_actions})")
        card = bisect_right(self.offsets, k)
        return unrank_combination(k - self.offsets[card - 1], card, self.num_users)

    def subset_to_index(self, subset) -> int:
        combo = sorted(int(u) for u in subset)
        if not 1 <= len(combo) <= self.n_max:
            raise ValueError(f"subset size must lie in [1, {self.n_max}], got {len(combo)}")
        if len(set(combo)) != len(combo) or combo[0] < 0 or combo[-1] >= self.num_users:
            raise ValueError(f"invalid subset {subset!r} for {self.num_users} users")
        return self.offsets[len(combo) - 1] + rank_combination(combo, self.num_users)

    def dim_split(self, k: int) -> tuple[int, ...]:
        k = int(k)
        if not 0 <= k < self.capacity:
            raise ValueError(f"index {k} overflows the radix capacity {self.capacity}")
        parts = []
        for size in self.dim_sizes:
            k, r = divmod(k, size)
            parts.append(r)
        return tuple(parts)

    def dim_join(self, parts, clamp: bool = True) -> int:
        if len(parts) != self.num_dims:
            raise ValueError(f"expected {self.num_dims} sub-indices, got {len(parts)}")
        k = 0
        for part, size in zip(reversed(parts), reversed(self.dim_sizes)):
            part = int(part)
            if not 0 <= part < size:
                raise ValueError(f"sub-index {part} out of range [0, {size})")
            k = k * size + part
        return min(k, self.num_actions - 1) if clamp else k

    def cell_centers(self, dim: int) -> np.ndarray:
        n = self.dim_sizes[dim]
        return -1.0 + (2.0 * np.arange(n) + 1.0) / n

    def embed(self, k: int) -> np.ndarray:
        """Cell-centre coordinates in [-1, 1]^D of action ``k``."""
        return np.array([-1.0 + (2.0 * p + 1.0) / n for p, n in zip(self.dim_split(k), self.dim_sizes)])
