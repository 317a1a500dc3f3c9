"""SMART agent: SAC proto action -> per-dimension KNN -> critic argmax over
joint candidates -> flat action index -> user subset."""
from __future__ import annotations

import json
import logging

import numpy as np

from ..channel import make_rng
from ..codec import ActionCodec
from ..schedulers import Scheduler, random_index
from .buffer import ReplayBuffer
from .knn import MAX_JOINT_CANDIDATES, joint_candidates
from .sac import SacAgent

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


def epsilon_schedule(epoch: int, decay_epochs: int = 500) -> float:
    """Linear decay from 1 at epoch 0 to 0 at ``decay_epochs``, then 0."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    if decay_epochs <= 0:
        return 0.0
    return max(0.0, 1.0 - epoch / decay_epochs)


class SmartAgent:
    """One scheduling agent (one RB)."""

    def __init__(self, num_users: int, n_max: int, dim_sizes=None, num_dims=None, max_dim_size=256, k=8,
                 hidden=(64, 64), batch_size=256, buffer_capacity=1_000_000, min_fill=1000,
                 updates_per_step=1, seed=0, **sac_kwargs):
        self.codec = ActionCodec(num_users, n_max, dim_sizes=dim_sizes, num_dims=num_dims,
                                 max_dim_size=max_dim_size)
        self.k = k
        self.batch_size = batch_size
        self.min_fill = min_fill
        self.updates_per_step = updates_per_step
        self.state_dim = 3 * num_users
        self.sac = SacAgent(self.state_dim, self.codec.num_dims, hidden=hidden, seed=seed, **sac_kwargs)
        self.buffer = ReplayBuffer(self.state_dim, self.codec.num_dims, buffer_capacity)
        self.rng = make_rng([seed, 2])
        self.clamp_count = 0
        self.num_updates = 0
        self._warned = False
        self._last = np.array(self.codec.dim_split(self.codec.num_actions - 1))

    @property
    def num_actions(self) -> int:
        return self.codec.num_actions

    def _embed_parts(self, parts: np.ndarray) -> np.ndarray:
        sizes = np.asarray(self.codec.dim_sizes, dtype=float)
        return -1.0 + (2.0 * parts + 1.0) / sizes

    def score_candidates(self, state, parts: np.ndarray):
        """Clamp sub-index rows, sort them by joined index and score with min(Q1, Q2).

        Rows are compared with the last valid action lexicographically (most
        significant dimension last), so no joined index is ever materialised
        and any radix capacity works. Returns ``(rows, q, clamped)``.
        """
        last = self._last
        diff = parts - last
        nz = diff != 0
        top = parts.shape[1] - 1 - np.argmax(nz[:, ::-1], axis=1)
        sign = np.where(nz.any(axis=1), np.sign(diff[np.arange(len(parts)), top]), 0)
        over = sign > 0
        clamped = int(np.count_nonzero(over))
        rows = parts[~over]
        if clamped and not np.any(sign == 0):
            rows = np.vstack([rows, last])
        rows = rows[np.lexsort(rows.T)]
        q = self.sac.q_min_shared(state, self._embed_parts(rows))
        return rows, q, clamped

    def act(self, state, epsilon: float = 0.0):
        """Flat action index and an info dict (``clamped``, ``num_candidates``, ``random``)."""
        if epsilon > 0.0 and self.rng.random() < epsilon:
            return random_index(self.rng, self.num_actions), {"clamped": 0, "num_candidates": 0, "random": True}
        proto, _ = self.sac.sample(np.atleast_2d(state))
        parts = joint_candidates(proto[0], self.codec.dim_sizes, self.k, MAX_JOINT_CANDIDATES)
        rows, q, clamped = self.score_candidates(state, parts)
        best = self.codec.dim_join(rows[int(np.argmax(q))])   # rows ascending, argmax takes the first maximum
        self.clamp_count += clamped
        return best, {"clamped": clamped, "num_candidates": len(parts), "random": False,
                      "proto": proto[0]}

    select_action = act

    def remember(self, state, action: int, reward: float, next_state, done: bool = False):
        self.buffer.store(state, self.codec.embed(action), reward, next_state, done)

    def learn(self):
        if len(self.buffer) < self.min_fill:
            if not self._warned:
                log.warning("replay buffer below min_fill (%d < %d); skipping update",
                            len(self.buffer), self.min_fill)
                self._warned = True
            return None
        diag = None
        for _ in range(self.updates_per_step):
            diag = self.sac.update(self.buffer.sample(self.batch_size, self.rng))
            self.num_updates += 1
        return diag

    # --- checkpointing ------------------------------------------------------------

    def state_dict(self) -> dict:
        out = {f"sac/{k}": v for k, v in self.sac.state_dict().items()}
        out.update({f"buf/{k}": v for k, v in self.buffer.state().items()})
        rngs = {"agent": self.rng.bit_generator.state, "sac": self.sac.rng.bit_generator.state}
        out["rng"] = np.array(json.dumps(rngs))
        out["counters"] = np.array([self.clamp_count, self.num_updates, int(self._warned)])
        return out

    def load_state_dict(self, st: dict):
        self.sac.load_state_dict({k[4:]: v for k, v in st.items() if k.startswith("sac/")})
        self.buffer.load_state({k[4:]: v for k, v in st.items() if k.startswith("buf/")})
        rngs = json.loads(str(st["rng"]))
        self.rng.bit_generator.state = rngs["agent"]
        self.sac.rng.bit_generator.state = rngs["sac"]
        self.clamp_count, self.num_updates, warned = (int(x) for x in st["counters"])
        self._warned = bool(warned)


def save_checkpoint(path, agents, meta: dict | None = None, extra: dict | None = None):
    """Versioned ``.npz`` with every agent's tensors, optimiser and RNG state."""
    arrays = {"version": np.array(CHECKPOINT_VERSION), "num_agents": np.array(len(agents)),
              "meta": np.array(json.dumps(meta or {}))}
    for i, agent in enumerate(agents):
        for k, v in agent.state_dict().items():
            arrays[f"agent{i}/{k}"] = v
    for k, v in (extra or {}).items():
        arrays[f"extra/{k}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, agents=None):
    """Returns ``(meta, extra)``; restores ``agents`` in place when given."""
    with np.load(path, allow_pickle=False) as z:
        data = {k: z[k] for k in z.files}
    if int(data["version"]) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {int(data['version'])}")
    meta = json.loads(str(data["meta"]))
    if agents is not None:
        if len(agents) != int(data["num_agents"]):
            raise ValueError(f"checkpoint holds {int(data['num_agents'])} agents, got {len(agents)}")
        for i, agent in enumerate(agents):
            prefix = f"agent{i}/"
            agent.load_state_dict({k[len(prefix):]: v for k, v in data.items() if k.startswith(prefix)})
    extra = {k[6:]: v for k, v in data.items() if k.startswith("extra/")}
    return meta, extra


class SmartScheduler(Scheduler):
    """Adapter exposing trained agents through the scheduler interface.

    With ``online_updates`` the agents keep learning from the observed rewards.
    """

    name = "smart"

    def __init__(self, agents, mode: str = "sa", epsilon: float = 0.0, online_updates: bool = False):
        self.agents = agents
        self.mode = mode
        self.epsilon = epsilon
        self.online_updates = online_updates
        self._pending = None

    def schedule(self, ctx):
        states = ctx.extra["states"]
        picks = [a.act(s, self.epsilon) for a, s in zip(self.agents, states)]
        self._pending = (states, [k for k, _ in picks])
        ctx.extra["clamp_counts"] = [info["clamped"] for _, info in picks]
        return [a.codec.index_to_subset(k) for a, (k, _) in zip(self.agents, picks)]

    def feedback(self, ctx, decisions, outcome):
        if not self.online_updates or self._pending is None:
            return
        states, actions = self._pending
        next_states = ctx.extra["next_states"]
        rewards = outcome.rb_rewards if self.mode == "sa" else np.full(len(self.agents), outcome.reward)
        for agent, s, k, r, s2 in zip(self.agents, states, actions, rewards, next_states):
            agent.remember(s, k, float(r), s2, False)
            agent.learn()
