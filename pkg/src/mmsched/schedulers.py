"""Classical schedulers behind a common per-TTI interface.

Every scheduler returns one sorted user tuple per RB. Opt-MR and Opt-PF
enumerate every subset of size 1..n_max (cardinality first, then
lexicographic) and keep the first strict maximum, which gives the documented
tie-break: fewer users first, then the lexicographically smallest subset.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .channel import make_rng
from .codec import ActionCodec, count_actions
from .fairness import weighted_rates
from .grouping import DEFAULT_CORR_THRESHOLD, correlation_matrix, group_users, groups_from_labels
from .phy import achieved_rates, su_mimo_rates

ENUMERATION_LIMIT = 10**6

RatesFn = Callable[[tuple], np.ndarray]


class ActionSpaceTooLarge(ValueError):
    pass


@dataclass
class TTIContext:
    """Everything a scheduler may look at for one TTI."""

    h: np.ndarray            # (B, M, L)
    noise_var: float
    totals: np.ndarray       # (L,) cumulative delivered rate per user
    n_max: int
    tti: int = 0
    su_rates: np.ndarray | None = None   # (B, L)
    labels: list | None = None            # per-RB group labels, if precomputed
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.su_rates is None:
            self.su_rates = np.stack([su_mimo_rates(hb, self.noise_var) for hb in self.h])

    @property
    def num_rbs(self) -> int:
        return self.h.shape[0]

    @property
    def num_users(self) -> int:
        return self.h.shape[2]

    def rates_fn(self, rb: int) -> RatesFn:
        hb, nv = self.h[rb], self.noise_var
        return lambda subset: achieved_rates(hb, subset, nv)[0]

    def fixed_rates_fn(self, rb: int) -> RatesFn:
        su = self.su_rates[rb]
        return lambda subset: su[list(subset)]


def enumerate_subsets(num_users: int, n_max: int):
    for card in range(1, n_max + 1):
        yield from combinations(range(num_users), card)


def _guard(num_users: int, n_max: int):
    total = count_actions(num_users, n_max)
    if total > ENUMERATION_LIMIT:
        raise ActionSpaceTooLarge(
            f"{total} candidate subsets exceed the exhaustive-search limit of {ENUMERATION_LIMIT}; "
            "use Approx-PF or SMART at this size")


def _argmax_subset(score: Callable[[tuple], float], num_users: int, n_max: int) -> tuple:
    _guard(num_users, n_max)
    best, best_val = None, -np.inf
    for subset in enumerate_subsets(num_users, n_max):
        val = score(subset)
        if val > best_val:
            best, best_val = subset, val
    return best


def opt_mr_schedule(rates_fn: RatesFn, num_users: int, n_max: int) -> tuple:
    """Subset with the largest achieved sum rate."""
    return _argmax_subset(lambda s: float(np.sum(rates_fn(s))), num_users, n_max)


def pf_objective(subset, rates_fn: RatesFn, totals) -> float:
    idx = list(subset)
    return float(np.sum(rates_fn(subset) / np.asarray(totals)[idx]))


def opt_pf_schedule(totals, rates_fn: RatesFn, num_users: int, n_max: int) -> tuple:
    """Subset maximising the sum of achieved rate over cumulative delivered rate."""
    totals = np.asarray(totals, dtype=float)
    return _argmax_subset(lambda s: pf_objective(s, rates_fn, totals), num_users, n_max)


def approx_pf_schedule(h: np.ndarray, totals, n: int, c_th=DEFAULT_CORR_THRESHOLD, seed=0,
                       noise_var: float = 1.0, su_rates=None) -> tuple:
    """Top-``n`` users by weighted rate, grouped by correlation; the largest group wins."""
    num_users = h.shape[1]
    if not 1 <= n <= num_users:
        raise ValueError(f"n must lie in [1, {num_users}], got {n}")
    if su_rates is None:
        su_rates = su_mimo_rates(h, noise_var)
    w = weighted_rates(su_rates, totals)
    top = np.argsort(-w, kind="stable")[:n]
    labels = group_users(correlation_matrix(h[:, top]), c_th, seed)
    groups = groups_from_labels(labels)
    largest = max(groups, key=len)   # first created wins ties
    return tuple(sorted(int(top[i]) for i in largest))


def rr_ug_chunks(h: np.ndarray, c_th, n_max: int, seed=0) -> list[tuple]:
    """Correlation groups over all users, each split into pieces of at most ``n_max``."""
    groups = groups_from_labels(group_users(correlation_matrix(h), c_th, seed))
    chunks = []
    for g in groups:
        chunks.extend(tuple(g[i:i + n_max]) for i in range(0, len(g), n_max))
    return chunks


def rr_ug_schedule(h: np.ndarray, cursor: int, c_th=DEFAULT_CORR_THRESHOLD, n_max: int = 1,
                   seed=0) -> tuple[tuple, int]:
    """Serve the ``cursor``-th group chunk; returns the decision and the advanced cursor."""
    chunks = rr_ug_chunks(h, c_th, n_max, seed)
    return chunks[cursor % len(chunks)], cursor + 1


def random_index(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in [0, n), valid beyond the int64 range."""
    if n < 2**62:
        return int(rng.integers(n))
    bits = n.bit_length()
    while True:
        k = 0
        for _ in range((bits + 61) // 62):
            k = (k << 62) | int(rng.integers(2**62))
        k >>= (62 * ((bits + 61) // 62) - bits)
        if k < n:
            return k


def random_schedule(num_users: int, n_max: int, seed=0, rng=None, codec: ActionCodec | None = None) -> tuple:
    codec = codec or ActionCodec(num_users, n_max, dim_sizes=(count_actions(num_users, n_max),))
    rng = make_rng(seed) if rng is None else rng
    return codec.index_to_subset(random_index(rng, codec.num_actions))


# --- uniform interface --------------------------------------------------------

class Scheduler:
    """Base class: ``schedule(ctx)`` returns one user tuple per RB."""

    name = "scheduler"

    def reset(self):
        pass

    def schedule(self, ctx: TTIContext) -> list[tuple]:
        raise NotImplementedError

    def feedback(self, ctx: TTIContext, decisions, outcome):
        """Hook for learning schedulers; classical ones ignore it."""


class OptMR(Scheduler):
    name = "opt-mr"

    def schedule(self, ctx):
        return [opt_mr_schedule(ctx.rates_fn(b), ctx.num_users, ctx.n_max) for b in range(ctx.num_rbs)]


class OptPF(Scheduler):
    name = "opt-pf"

    def __init__(self, fixed_rates: bool = False):
        self.fixed_rates = fixed_rates

    def schedule(self, ctx):
        fn = ctx.fixed_rates_fn if self.fixed_rates else ctx.rates_fn
        return [opt_pf_schedule(ctx.totals, fn(b), ctx.num_users, ctx.n_max) for b in range(ctx.num_rbs)]


class ApproxPF(Scheduler):
    name = "approx-pf"

    def __init__(self, c_th=DEFAULT_CORR_THRESHOLD, seed=0):
        self.c_th, self.seed = c_th, seed

    def schedule(self, ctx):
        return [approx_pf_schedule(ctx.h[b], ctx.totals, ctx.n_max, self.c_th, self.seed,
                                   ctx.noise_var, ctx.su_rates[b]) for b in range(ctx.num_rbs)]


class RRUG(Scheduler):
    """Round-robin over correlation groups; one cursor per RB."""

    name = "rr-ug"

    def __init__(self, c_th=DEFAULT_CORR_THRESHOLD, seed=0):
        self.c_th, self.seed = c_th, seed
        self.cursors: dict[int, int] = {}
        self._chunks: dict[int, tuple] = {}   # rb -> (channel bytes, chunks)

    def reset(self):
        self.cursors.clear()
        self._chunks.clear()

    def schedule(self, ctx):
        out = []
        for b in range(ctx.num_rbs):
            # groups only change when the channel does
            key = ctx.h[b].tobytes()
            hit = self._chunks.get(b)
            if hit is None or hit[0] != key:
                hit = self._chunks[b] = (key, rr_ug_chunks(ctx.h[b], self.c_th, ctx.n_max, self.seed))
            chunks = hit[1]
            cursor = self.cursors.get(b, 0)
            out.append(chunks[cursor % len(chunks)])
            self.cursors[b] = cursor + 1
        return out


class RandomScheduler(Scheduler):
    name = "random"

    def __init__(self, seed=0):
        self.seed = seed
        self.rng = make_rng(seed)
        self._codec = None

    def reset(self):
        self.rng = make_rng(self.seed)

    def schedule(self, ctx):
        if self._codec is None or self._codec.num_users != ctx.num_users or self._codec.n_max != ctx.n_max:
            self._codec = ActionCodec(ctx.num_users, ctx.n_max,
                                      dim_sizes=(count_actions(ctx.num_users, ctx.n_max),))
        return [random_schedule(ctx.num_users, ctx.n_max, rng=self.rng, codec=self._codec)
                for _ in range(ctx.num_rbs)]


CLASSICAL = {cls.name: cls for cls in (OptMR, OptPF, ApproxPF, RRUG, RandomScheduler)}
