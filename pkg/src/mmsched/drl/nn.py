"""Minimal float64 MLP with hand-written backprop, and Adam."""
from __future__ import annotations

import numpy as np


class Mlp:
    """Fully connected net, ReLU on hidden layers, linear output.

    ``params`` is a flat list ``[W0, b0, W1, b1, ...]`` with ``W`` shaped
    (fan_in, fan_out). Initialisation is uniform in +-1/sqrt(fan_in).
    """

    def __init__(self, sizes, rng: np.random.Generator, out_scale: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.params = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if i == len(self.sizes) - 2:
                bound *= out_scale
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, fan_out))

    @property
    def num_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x, params=None):
        """Returns ``(y, cache)``; ``cache`` holds every layer's input."""
        params = self.params if params is None else params
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input of shape (batch, {self.sizes[0]}), got {x.shape}")
        cache = [x]
        h = x
        last = self.num_layers - 1
        for i in range(self.num_layers):
            h = h @ params[2 * i] + params[2 * i + 1]
            if i < last:
                h = np.maximum(h, 0.0)
                cache.append(h)
        return h, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dy, params=None):
        """Gradients of ``sum(dy * y)`` w.r.t. every parameter and the input."""
        params = self.params if params is None else params
        dy = np.asarray(dy, dtype=float)
        if dy.shape != (cache[0].shape[0], self.sizes[-1]):
            raise ValueError(f"upstream gradient has shape {dy.shape}, expected "
                             f"{(cache[0].shape[0], self.sizes[-1])}")
        grads = [None] * len(params)
        g = dy
        for i in reversed(range(self.num_layers)):
            inp = cache[i]
            grads[2 * i] = inp.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ params[2 * i].T
            if i > 0:
                g = g * (inp > 0)
        return grads, g

    def copy(self) -> "Mlp":
        out = Mlp.__new__(Mlp)
        out.sizes = self.sizes
        out.params = [p.copy() for p in self.params]
        return out


class Adam:
    """Adam with bias correction; updates the parameter arrays in place."""

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params

    def state(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state(self, t, m, v):
        self.t = int(t)
        for dst, src in zip(self.m, m):
            dst[...] = src
        for dst, src in zip(self.v, v):
            dst[...] = src
