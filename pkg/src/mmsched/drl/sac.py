"""Soft actor-critic with tanh-squashed Gaussian policy, twin critics,
Polyak-averaged targets and automatic temperature tuning."""
from __future__ import annotations

import numpy as np

from ..channel import make_rng
from .nn import Adam, Mlp

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG2 = np.log(2.0)


def log1m_tanh_sq(u):
    """``log(1 - tanh(u)^2)`` without cancellation for large |u|."""
    return 2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))


def gaussian_entropy(log_std) -> float:
    """Differential entropy of a diagonal Gaussian (before squashing)."""
    log_std = np.asarray(log_std, dtype=float)
    return float(np.sum(log_std + 0.5 + _HALF_LOG_2PI))


def squashed_log_prob(a, mu, log_std) -> np.ndarray:
    """Density of ``tanh(N(mu, exp(log_std)^2))`` at ``a`` in (-1, 1), summed over dims."""
    a = np.asarray(a, dtype=float)
    u = np.arctanh(a)
    xi = (u - mu) / np.exp(log_std)
    return np.sum(-0.5 * xi * xi - log_std - _HALF_LOG_2PI - log1m_tanh_sq(u), axis=-1)


class SacAgent:
    def __init__(self, state_dim: int, action_dim: int, hidden=(64, 64), actor_lr=5e-4, critic_lr=5e-4,
                 alpha_lr=3e-4, gamma=0.99, tau=0.005, init_alpha=1.0, target_entropy=None,
                 auto_entropy=True, seed=0):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.gamma = gamma
        self.tau = tau
        self.auto_entropy = auto_entropy
        self.target_entropy = -float(action_dim) if target_entropy is None else float(target_entropy)
        init_rng = make_rng([seed, 0])
        self.rng = make_rng([seed, 1])
        self.actor = Mlp((state_dim, *hidden, 2 * action_dim), init_rng)
        self.q1 = Mlp((state_dim + action_dim, *hidden, 1), init_rng)
        self.q2 = Mlp((state_dim + action_dim, *hidden, 1), init_rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.log_alpha = np.array([np.log(init_alpha)])
        self.actor_opt = Adam(self.actor.params, actor_lr)
        self.q1_opt = Adam(self.q1.params, critic_lr)
        self.q2_opt = Adam(self.q2.params, critic_lr)
        self.alpha_opt = Adam([self.log_alpha], alpha_lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # --- policy -----------------------------------------------------------

    def policy(self, states, noise):
        """Reparameterised sample ``a = tanh(mu + sigma * noise)`` and its log-density."""
        out, cache = self.actor.forward(states)
        d = self.action_dim
        mu, raw_ls = out[:, :d], out[:, d:]
        log_std = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
        sigma = np.exp(log_std)
        u = mu + sigma * noise
        a = np.tanh(u)
        logp = np.sum(-0.5 * noise * noise - log_std - _HALF_LOG_2PI - log1m_tanh_sq(u), axis=1)
        return a, logp, (cache, raw_ls, sigma, noise, a)

    def sample(self, states):
        states = np.atleast_2d(states)
        noise = self.rng.standard_normal((states.shape[0], self.action_dim))
        a, logp, _ = self.policy(states, noise)
        return a, logp

    def mean_action(self, states):
        out = self.actor(np.atleast_2d(states))
        return np.tanh(out[:, :self.action_dim])

    # --- critics ------------------------------------------------------------

    def q_values(self, states, actions, target=False):
        x = np.concatenate([states, actions], axis=1)
        n1, n2 = (self.q1_target, self.q2_target) if target else (self.q1, self.q2)
        return n1(x)[:, 0], n2(x)[:, 0]

    def q_min(self, states, actions, target=False):
        return np.minimum(*self.q_values(states, actions, target))

    def q_min_shared(self, state, actions):
        """``q_min`` for many actions at one state; the state's share of the
        first layer is computed once."""
        state = np.asarray(state, dtype=float).ravel()
        s_dim = self.state_dim
        out = []
        for net in (self.q1, self.q2):
            w0, b0 = net.params[0], net.params[1]
            h = actions @ w0[s_dim:] + (state @ w0[:s_dim] + b0)
            for i in range(1, net.num_layers):
                h = np.maximum(h, 0.0) @ net.params[2 * i] + net.params[2 * i + 1]
            out.append(h[:, 0])
        return np.minimum(*out)

    # --- losses and gradients (pure given parameters and noise) -----------------

    def critic_targets(self, batch, next_noise):
        a2, logp2, _ = self.policy(batch["next_obs"], next_noise)
        q_next = self.q_min(batch["next_obs"], a2, target=True) - self.alpha * logp2
        return batch["rew"] + self.gamma * (1.0 - batch["done"]) * q_next

    def critic_loss_grads(self, batch, next_noise):
        """Squared-error losses of both critics against the soft Bellman target."""
        y = self.critic_targets(batch, next_noise)
        x = np.concatenate([batch["obs"], batch["act"]], axis=1)
        n = x.shape[0]
        losses, grads = [], []
        for net in (self.q1, self.q2):
            q, cache = net.forward(x)
            diff = q[:, 0] - y
            losses.append(0.5 * float(np.mean(diff * diff)))
            grads.append(net.backward(cache, (diff / n)[:, None])[0])
        return losses, grads, y

    def actor_loss_grads(self, states, noise):
        """``mean(alpha * logp - min(Q1, Q2))`` and its actor-parameter gradient."""
        a, logp, (cache, raw_ls, sigma, xi, _) = self.policy(states, noise)
        n, s_dim = states.shape[0], self.state_dim
        x = np.concatenate([states, a], axis=1)
        q1, c1 = self.q1.forward(x)
        q2, c2 = self.q2.forward(x)
        use1 = (q1[:, 0] <= q2[:, 0])[:, None]
        qmin = np.where(use1[:, 0], q1[:, 0], q2[:, 0])
        alpha = self.alpha
        loss = float(np.mean(alpha * logp - qmin))
        dq = -np.ones((n, 1)) / n
        _, dx1 = self.q1.backward(c1, dq * use1)
        _, dx2 = self.q2.backward(c2, dq * ~use1)
        ga = (dx1 + dx2)[:, s_dim:]
        dtanh = 1.0 - a * a
        c = alpha / n
        dmu = ga * dtanh + c * 2.0 * a
        dls = ga * dtanh * sigma * xi + c * (-1.0 + 2.0 * a * sigma * xi)
        dls = dls * ((raw_ls > LOG_STD_MIN) & (raw_ls < LOG_STD_MAX))
        grads, _ = self.actor.backward(cache, np.concatenate([dmu, dls], axis=1))
        return loss, grads, logp

    def alpha_loss_grad(self, logp):
        """Loss ``mean(-alpha * (logp + target_entropy))`` and its log-alpha gradient."""
        gap = float(np.mean(logp + self.target_entropy))
        alpha = self.alpha
        return -alpha * gap, np.array([-alpha * gap])

    # --- update ---------------------------------------------------------------

    def polyak(self):
        tau = self.tau
        for net, tgt in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            for p, tp in zip(net.params, tgt.params):
                tp[...] = (1.0 - tau) * tp + tau * p

    def update(self, batch) -> dict:
        n = batch["obs"].shape[0]
        next_noise = self.rng.standard_normal((n, self.action_dim))
        (l1, l2), (g1, g2), _ = self.critic_loss_grads(batch, next_noise)
        self.q1_opt.step(self.q1.params, g1)
        self.q2_opt.step(self.q2.params, g2)
        noise = self.rng.standard_normal((n, self.action_dim))
        actor_loss, ga, logp = self.actor_loss_grads(batch["obs"], noise)
        self.actor_opt.step(self.actor.params, ga)
        alpha_loss = 0.0
        if self.auto_entropy:
            alpha_loss, galpha = self.alpha_loss_grad(logp)
            self.alpha_opt.step([self.log_alpha], [galpha])
        self.polyak()
        return {"q1_loss": l1, "q2_loss": l2, "actor_loss": actor_loss, "alpha_loss": alpha_loss,
                "alpha": self.alpha, "entropy": -float(np.mean(logp))}

    # --- serialisation ----------------------------------------------------------

    def _nets(self):
        return {"actor": self.actor, "q1": self.q1, "q2": self.q2, "q1_target": self.q1_target,
                "q2_target": self.q2_target}

    def _opts(self):
        return {"actor": self.actor_opt, "q1": self.q1_opt, "q2": self.q2_opt, "alpha": self.alpha_opt}

    def state_dict(self) -> dict:
        out = {"log_alpha": self.log_alpha.copy()}
        for name, net in self._nets().items():
            for i, p in enumerate(net.params):
                out[f"net/{name}/{i}"] = p.copy()
        for name, opt in self._opts().items():
            out[f"opt/{name}/t"] = np.array(opt.t)
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                out[f"opt/{name}/m/{i}"] = m.copy()
                out[f"opt/{name}/v/{i}"] = v.copy()
        return out

    def load_state_dict(self, st: dict):
        self.log_alpha[...] = st["log_alpha"]
        for name, net in self._nets().items():
            for i, p in enumerate(net.params):
                p[...] = st[f"net/{name}/{i}"]
        for name, opt in self._opts().items():
            k = len(opt.m)
            opt.load_state(st[f"opt/{name}/t"], [st[f"opt/{name}/m/{i}"] for i in range(k)],
                           [st[f"opt/{name}/v/{i}"] for i in range(k)])
