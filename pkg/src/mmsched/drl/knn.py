"""Nearest discrete points to a proto action on a per-dimension uniform grid."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

MAX_JOINT_CANDIDATES = 4096


def cell_centers(dim_size: int) -> np.ndarray:
    return -1.0 + (2.0 * np.arange(dim_size) + 1.0) / dim_size


def knn_candidates(proto: float, dim_size: int, k: int) -> np.ndarray:
    """The ``k`` cell indices closest to ``proto``, nearest first, ties to the lower index."""
    if not 1 <= k <= dim_size:
        raise ValueError(f"k must lie in [1, {dim_size}], got {k}")
    dist = np.abs(cell_centers(dim_size) - float(proto))
    return np.argsort(dist, kind="stable")[:k]


@lru_cache(maxsize=64)
def _rank_tuples(ks, limit):
    """Rank tuples (one rank per dimension) in order of increasing rank sum,
    lexicographic within equal sums, truncated to ``limit``."""
    d = len(ks)
    total = int(np.prod(ks, dtype=object))
    if total <= limit:
        grids = np.meshgrid(*[np.arange(k) for k in ks], indexing="ij")
        ranks = np.stack([g.ravel() for g in grids], axis=1)
        order = np.lexsort(tuple(ranks[:, i] for i in reversed(range(d))) + (ranks.sum(axis=1),))
        out = ranks[order]
        out.flags.writeable = False
        return out
    out = []
    max_sum = sum(k - 1 for k in ks)

    def fill(prefix, dim, remaining):
        if len(out) >= limit:
            return
        if dim == d - 1:
            if remaining < ks[dim]:
                out.append(prefix + [remaining])
            return
        for r in range(min(remaining, ks[dim] - 1) + 1):
            fill(prefix + [r], dim + 1, remaining - r)
            if len(out) >= limit:
                return

    for s in range(max_sum + 1):
        fill([], 0, s)
        if len(out) >= limit:
            break
    out = np.array(out[:limit])
    out.flags.writeable = False
    return out


def joint_candidates(proto, dim_sizes, k: int, limit: int = MAX_JOINT_CANDIDATES) -> np.ndarray:
    """Cartesian product of per-dimension KNN lists, trimmed by summed neighbour rank.

    Returns an integer array (num_candidates, D) of sub-indices.
    """
    proto = np.asarray(proto, dtype=float).ravel()
    per_dim = [knn_candidates(p, n, min(k, n)) for p, n in zip(proto, dim_sizes)]
    ranks = _rank_tuples(tuple(len(c) for c in per_dim), limit)
    return np.stack([per_dim[i][ranks[:, i]] for i in range(len(per_dim))], axis=1)
