"""Cumulative delivered-rate bookkeeping and Jain's fairness index."""
from __future__ import annotations

import numpy as np

LEDGER_EPS = 1e-6


def jfi(values) -> float:
    """Jain's fairness index ``(sum f)^2 / (L * sum f^2)``, rounding kept inside [1/L, 1]."""
    f = np.asarray(values, dtype=float)
    if f.size == 0 or np.any(f < 0):
        raise ValueError("JFI needs a non-empty, nonnegative vector")
    sq = float(np.dot(f, f))
    if sq == 0.0:
        raise ValueError("JFI is undefined for an all-zero vector")
    return min(max(float(f.sum()) ** 2 / (f.size * sq), 1.0 / f.size), 1.0)


class FairnessLedger:
    """Per-user, per-RB cumulative delivered rate ``p[l, b]``, initialised to ``eps``.

    ``totals`` is the per-user sum over RBs, used both as the proportional
    fair divisor and as the fairness state.
    """

    def __init__(self, num_users: int, num_rbs: int = 1, eps: float = LEDGER_EPS):
        if eps <= 0:
            raise ValueError("ledger eps must be positive")
        self.eps = eps
        self.p = np.full((num_users, num_rbs), eps)

    @property
    def num_users(self) -> int:
        return self.p.shape[0]

    @property
    def num_rbs(self) -> int:
        return self.p.shape[1]

    @property
    def totals(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def reset(self):
        self.p.fill(self.eps)

    def record(self, rb: int, users, rates):
        users = np.asarray(list(users), dtype=np.int64)
        np.add.at(self.p[:, rb], users, np.asarray(rates, dtype=float))

    def jfi(self) -> float:
        return jfi(self.totals)

    def copy(self) -> "FairnessLedger":
        out = FairnessLedger(self.num_users, self.num_rbs, self.eps)
        out.p = self.p.copy()
        return out


def weighted_rates(rates, totals) -> np.ndarray:
    """Proportional-fair metric: instantaneous rate over cumulative delivered rate."""
    return np.asarray(rates, dtype=float) / np.asarray(totals, dtype=float)
