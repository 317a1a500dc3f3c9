"""Inter-user channel correlation and greedy correlation-threshold grouping."""
from __future__ import annotations

import numpy as np

from .channel import make_rng

DEFAULT_CORR_THRESHOLD = 0.5


def correlation_matrix(h: np.ndarray) -> np.ndarray:
    """``c_ij = |h_i^H h_j| / (|h_i| |h_j|)`` for the columns of the M x L matrix ``h``.

    All-zero columns get correlation 0 with every other user and 1 on the diagonal.
    """
    h = np.asarray(h, dtype=np.complex128)
    norms = np.linalg.norm(h, axis=0)
    nz = norms > 0
    unit = np.zeros_like(h)
    unit[:, nz] = h[:, nz] / norms[nz]
    c = np.abs(unit.conj().T @ unit)
    c = np.minimum(c, 1.0)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


def group_users(corr: np.ndarray, c_th: float = DEFAULT_CORR_THRESHOLD, seed=0, rng=None) -> np.ndarray:
    """Partition users so that every pair inside a group has correlation < ``c_th``.

    Repeatedly seeds a group with a random remaining user, then scans the
    remaining users in ascending index order and absorbs each one whose
    correlation with every current member is below the threshold. Returns
    one label per user, numbered in group-creation order.
    """
    if not 0.0 < c_th <= 1.0:
        raise ValueError(f"c_th must lie in (0, 1], got {c_th}")
    corr = np.asarray(corr)
    rng = make_rng(seed) if rng is None else rng
    num_users = corr.shape[0]
    labels = np.full(num_users, -1, dtype=np.int64)
    remaining = list(range(num_users))
    label = 0
    while remaining:
        first = remaining[int(rng.integers(len(remaining)))]
        members = [first]
        for j in remaining:
            if j != first and np.all(corr[j, members] < c_th):
                members.append(j)
        labels[members] = label
        label += 1
        taken = set(members)
        remaining = [j for j in remaining if j not in taken]
    return labels


def groups_from_labels(labels) -> list[list[int]]:
    """Member lists in label order, members ascending."""
    labels = np.asarray(labels)
    return [np.flatnonzero(labels == g).tolist() for g in range(int(labels.max()) + 1)] if labels.size else []
