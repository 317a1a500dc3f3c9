"""Scheduling MDP: state assembly, reward, shared fairness ledger and the
per-RB agent orchestrations (independent "SA" and shared-reward "MA")."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelTrace
from .fairness import LEDGER_EPS, FairnessLedger, jfi
from .grouping import DEFAULT_CORR_THRESHOLD, correlation_matrix, group_users
from .phy import achieved_rates, normalization_factor, su_mimo_rates
from .schedulers import TTIContext

DEFAULT_BETA = 0.5
METRIC_COLUMNS = ("tti", "rb", "scheduled_set", "sum_rate", "norm_sum_rate", "jfi", "reward", "clamp_count")


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.full(x.shape, 0.5)
    return (x - lo) / (hi - lo)


def build_state(su_rates, totals, labels) -> np.ndarray:
    """Per-user ``(gamma, f, g)`` triples flattened to length 3L.

    gamma and f are min-max scaled across users (0.5 when all equal); the
    group label is encoded as ``(label + 1) / num_groups``.
    """
    su_rates = np.asarray(su_rates, dtype=float)
    totals = np.asarray(totals, dtype=float)
    labels = np.asarray(labels)
    g = (labels + 1.0) / (labels.max() + 1.0)
    return np.column_stack([_minmax(su_rates), _minmax(totals), g]).ravel()


def reward(norm_rate: float, fairness: float, beta: float = DEFAULT_BETA) -> float:
    return beta * norm_rate + (1.0 - beta) * fairness


@dataclass
class StepOutcome:
    tti: int
    decisions: list
    rates: list
    sum_rates: np.ndarray
    norm_rates: np.ndarray
    singular: np.ndarray
    jfi: float
    rb_rewards: np.ndarray
    reward: float
    clip_count: int = 0
    clamp_counts: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def norm_se(self) -> float:
        return float(np.mean(self.norm_rates))


class SchedulingEnv:
    """Walks a channel trace TTI by TTI, keeping the fairness ledger.

    The trace index wraps modulo T, so a static single-snapshot trace can
    drive arbitrarily long runs.
    """

    def __init__(self, trace: ChannelTrace, n_max: int, beta: float = DEFAULT_BETA,
                 c_th: float = DEFAULT_CORR_THRESHOLD, group_seed: int = 0,
                 ledger_eps: float = LEDGER_EPS, start_tti: int = 0, cache_limit: int = 4096):
        if not 1 <= n_max <= min(trace.num_users, trace.num_bs_antennas):
            raise ValueError(f"n_max must lie in [1, min(M, L)], got {n_max}")
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        self.trace = trace
        self.n_max = n_max
        self.beta = beta
        self.c_th = c_th
        self.group_seed = group_seed
        self.ledger = FairnessLedger(trace.num_users, trace.num_rbs, ledger_eps)
        self.start_tti = start_tti
        self.t = start_tti
        self.cache_limit = cache_limit
        self._cache: dict = {}

    @property
    def num_rbs(self) -> int:
        return self.trace.num_rbs

    @property
    def num_users(self) -> int:
        return self.trace.num_users

    @property
    def state_dim(self) -> int:
        return 3 * self.num_users

    def reset(self, reset_ledger: bool = True, tti: int | None = None):
        if reset_ledger:
            self.ledger.reset()
        if tti is not None:
            self.t = tti

    def channel(self, b: int) -> np.ndarray:
        return self.trace.at(self.t, b)

    def rb_info(self, b: int):
        """(SU rates, normalization factor, group labels) of RB ``b`` at the current TTI."""
        key = (self.t % self.trace.num_ttis, b)
        hit = self._cache.get(key)
        if hit is None:
            if self.trace.num_ttis > self.cache_limit:
                self._cache = {k: v for k, v in self._cache.items() if k[0] == key[0]}
            h = self.channel(b)
            su = su_mimo_rates(h, self.trace.noise_var)
            labels = group_users(correlation_matrix(h), self.c_th, self.group_seed)
            hit = self._cache[key] = (su, normalization_factor(su, self.n_max), labels)
        return hit

    def observe(self, b: int) -> np.ndarray:
        su, _, labels = self.rb_info(b)
        return build_state(su, self.ledger.totals, labels)

    def observe_all(self) -> list[np.ndarray]:
        return [self.observe(b) for b in range(self.num_rbs)]

    def context(self) -> TTIContext:
        infos = [self.rb_info(b) for b in range(self.num_rbs)]
        return TTIContext(h=self.trace.h[self.t % self.trace.num_ttis], noise_var=self.trace.noise_var,
                          totals=self.ledger.totals, n_max=self.n_max, tti=self.t,
                          su_rates=np.stack([i[0] for i in infos]), labels=[i[2] for i in infos])

    def step(self, decisions, clamp_counts=None) -> StepOutcome:
        """Apply one decision per RB, update the ledger once, advance the TTI."""
        if len(decisions) != self.num_rbs:
            raise ValueError(f"need {self.num_rbs} decisions, got {len(decisions)}")
        num_rbs = self.num_rbs
        rates, sums = [], np.zeros(num_rbs)
        norm = np.zeros(num_rbs)
        singular = np.zeros(num_rbs, dtype=bool)
        clips = 0
        for b, subset in enumerate(decisions):
            subset = tuple(int(u) for u in subset)
            if not 1 <= len(subset) <= self.n_max or len(set(subset)) != len(subset) \
                    or min(subset) < 0 or max(subset) >= self.num_users:
                raise ValueError(f"invalid decision {subset} on RB {b}")
            r, singular[b] = achieved_rates(self.channel(b), subset, self.trace.noise_var)
            _, nf, _ = self.rb_info(b)
            rates.append(r)
            sums[b] = r.sum()
            value = sums[b] / nf
            if value > 1.0:
                clips += 1
                value = 1.0
            norm[b] = value
        for b, (subset, r) in enumerate(zip(decisions, rates)):
            self.ledger.record(b, subset, r)
        fair = self.ledger.jfi()
        rb_rewards = self.beta * norm + (1.0 - self.beta) * fair
        out = StepOutcome(tti=self.t, decisions=[tuple(d) for d in decisions], rates=rates, sum_rates=sums,
                          norm_rates=norm, singular=singular, jfi=fair, rb_rewards=rb_rewards,
                          reward=reward(float(norm.mean()), fair, self.beta), clip_count=clips,
                          clamp_counts=None if clamp_counts is None else np.asarray(clamp_counts))
        self.t += 1
        return out


# --- agent orchestration --------------------------------------------------------

def agent_step(agents, env: SchedulingEnv, mode: str = "sa", epsilon: float = 0.0,
               learn: bool = True, done: bool = False) -> StepOutcome:
    """One TTI with one agent per RB.

    ``mode="sa"``: each agent is rewarded with its own RB's rate term plus the
    global JFI. ``mode="ma"``: every agent stores the same global reward.
    All agents observe before the ledger is updated; the ledger changes once.
    """
    if mode not in ("sa", "ma"):
        raise ValueError(f"mode must be 'sa' or 'ma', got {mode!r}")
    if len(agents) != env.num_rbs:
        raise ValueError(f"need one agent per RB ({env.num_rbs}), got {len(agents)}")
    states = env.observe_all()
    picks = [agent.act(s, epsilon) for agent, s in zip(agents, states)]
    decisions = [agent.codec.index_to_subset(k) for agent, (k, _) in zip(agents, picks)]
    outcome = env.step(decisions, clamp_counts=[info.get("clamped", 0) for _, info in picks])
    outcome.extra["actions"] = [k for k, _ in picks]
    if learn:
        next_states = env.observe_all()
        rewards = outcome.rb_rewards if mode == "sa" else np.full(env.num_rbs, outcome.reward)
        for agent, s, (k, _), r, s2 in zip(agents, states, picks, rewards, next_states):
            agent.remember(s, k, float(r), s2, done)
            agent.learn()
    return outcome


def run_sa_episode(agents, env: SchedulingEnv, num_ttis: int, epsilon: float = 0.0,
                   learn: bool = True, log: "MetricsLog | None" = None) -> dict:
    """``num_ttis`` steps of independent per-RB agents sharing the ledger."""
    return _run(agents, env, num_ttis, "sa", epsilon, learn, log)


def run_ma_step(agents, env: SchedulingEnv, epsilon: float = 0.0, learn: bool = True,
                done: bool = False) -> tuple[list, float, StepOutcome]:
    """One cooperative step: joint decision and the reward broadcast to every agent."""
    outcome = agent_step(agents, env, "ma", epsilon, learn, done)
    return outcome.decisions, outcome.reward, outcome


def run_ma_episode(agents, env: SchedulingEnv, num_ttis: int, epsilon: float = 0.0,
                   learn: bool = True, log: "MetricsLog | None" = None) -> dict:
    return _run(agents, env, num_ttis, "ma", epsilon, learn, log)


def _run(agents, env, num_ttis, mode, epsilon, learn, log):
    rewards, se, fair = [], [], []
    for i in range(num_ttis):
        out = agent_step(agents, env, mode, epsilon, learn)
        rewards.append(out.reward if mode == "ma" else float(np.mean(out.rb_rewards)))
        se.append(out.norm_se)
        fair.append(out.jfi)
        if log is not None:
            log.add(out, mode)
    return {"reward": np.array(rewards), "norm_se": np.array(se), "jfi": np.array(fair)}


class MetricsLog:
    """Per-(TTI, RB) metric rows, written as CSV."""

    def __init__(self):
        self.rows: list[tuple] = []

    def add(self, out: StepOutcome, mode: str = "ma"):
        for b, subset in enumerate(out.decisions):
            rew = out.reward if mode == "ma" else float(out.rb_rewards[b])
            clamp = 0 if out.clamp_counts is None else int(out.clamp_counts[b])
            self.rows.append((out.tti, b, ";".join(map(str, subset)), float(out.sum_rates[b]),
                              float(out.norm_rates[b]), out.jfi, rew, clamp))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRIC_COLUMNS)
            for row in self.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["tti"], r["rb"], r["clamp_count"] = int(r["tti"]), int(r["rb"]), int(r["clamp_count"])
        for k in ("sum_rate", "norm_sum_rate", "jfi", "reward"):
            r[k] = float(r[k])
    return rows
