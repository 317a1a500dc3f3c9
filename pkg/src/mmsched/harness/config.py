"""Experiment configuration: flat ``key = value`` files, presets and overrides.

Precedence, lowest first: built-in defaults, preset, config file, explicit
overrides (``--key value`` on the command line).
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..channel import RB_MODES, TOPOLOGIES, ScenarioConfig
from ..codec import count_actions

SMART = "smart"
SCHEDULER_NAMES = ("opt-mr", "opt-pf", "approx-pf", "rr-ug", "random", SMART)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # scenario
    topology: str = "clustered"
    M: int = 4
    L: int = 4
    B: int = 1
    T: int = 0                      # trace length; 0 picks 1 for static, train + eval TTIs for mobile
    n_max: int = 2
    noise_var: float = 0.16
    num_clusters: int = 2
    intra_cluster_corr: float = 0.9
    temporal_corr: float = 0.9
    rb_mode: str = "independent"
    num_taps: int = 4
    trace: str = ""                 # load this trace file instead of generating one
    # MDP
    beta: float = 0.5
    c_th: float = 0.5
    group_seed: int = 0
    reset_ledger: bool = True       # fresh fairness ledger at every episode
    # training
    mode: str = "sa"
    epochs: int = 200
    iters: int = 200
    eps_decay_epochs: int = 125
    k: int = 8
    num_dims: int = 0               # 0: fewest dimensions with at most max_dim_size actions each
    max_dim_size: int = 256
    hidden: tuple = (64, 64)
    batch_size: int = 256
    buffer_capacity: int = 1_000_000
    min_fill: int = 1000
    updates_per_step: int = 1
    gamma: float = 0.99
    tau: float = 0.005
    actor_lr: float = 5e-4
    critic_lr: float = 5e-4
    alpha_lr: float = 3e-4
    checkpoint_every: int = 0
    # evaluation
    eval_ttis: int = 400
    eval_start: int = -1            # -1: right after the training TTIs on mobile traces, else 0
    schedulers: tuple = ("opt-mr", "opt-pf", "approx-pf", "rr-ug", "random")
    pf_fixed_rates: bool = False
    online_updates: bool = False
    bench_ttis: int = 100
    # bookkeeping
    seed: int = 0
    out: str = "runs"

    @property
    def train_ttis(self) -> int:
        return self.epochs * self.iters

    @property
    def num_ttis(self) -> int:
        if self.T:
            return self.T
        return self.train_ttis + self.eval_ttis if self.topology == "mobile" else 1

    @property
    def eval_start_tti(self) -> int:
        if self.eval_start >= 0:
            return self.eval_start
        return self.train_ttis if self.topology == "mobile" else 0

    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(topology=self.topology, num_clusters=self.num_clusters,
                              intra_cluster_corr=self.intra_cluster_corr, temporal_corr=self.temporal_corr,
                              rb_mode=self.rb_mode, num_taps=self.num_taps, rng_seed=self.seed,
                              noise_var=self.noise_var)

    def validate(self) -> "ExperimentConfig":
        if min(self.M, self.L, self.B) < 1:
            raise ConfigError("M, L and B must be positive")
        if not 1 <= self.n_max <= min(self.M, self.L):
            raise ConfigError(f"n_max={self.n_max} must lie in [1, min(M, L)] = [1, {min(self.M, self.L)}]")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        if self.rb_mode not in RB_MODES:
            raise ConfigError(f"unknown rb_mode {self.rb_mode!r}; expected one of {RB_MODES}")
        if self.mode not in ("sa", "ma"):
            raise ConfigError(f"mode must be 'sa' or 'ma', got {self.mode!r}")
        unknown = [s for s in self.schedulers if s not in SCHEDULER_NAMES]
        if unknown:
            raise ConfigError(f"unknown schedulers {unknown}; expected names from {SCHEDULER_NAMES}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.topology == "clustered" and not 1 <= self.num_clusters <= self.L:
            raise ConfigError(f"num_clusters must lie in [1, L], got {self.num_clusters}")
        if min(self.epochs, self.iters, self.eval_ttis, self.k, self.batch_size) < 1:
            raise ConfigError("epochs, iters, eval_ttis, k and batch_size must be positive")
        if self.num_ttis < 1:
            raise ConfigError("trace length must be positive")
        if self.num_dims < 0 or self.num_dims > count_actions(self.L, self.n_max):
            raise ConfigError(f"invalid num_dims {self.num_dims}")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()

# Desk-scale runs are a few hundred epochs; a faster critic learns the
# fairness-dependent part of Q within that budget (4x4: final JFI 0.99 vs 0.75).
_DESK = dict(critic_lr=2e-3)

PRESETS = {
    # small static clustered cell, exhaustive baselines are cheap
    "preset-4x4": dict(**_DESK, topology="clustered", M=4, L=4, B=1, n_max=2, num_clusters=2, intra_cluster_corr=0.9,
                       epochs=200, iters=200, eps_decay_epochs=125),
    # two RBs with independent fading, eight users
    "preset-8x8-2rb": dict(**_DESK, topology="random-static", M=8, L=8, B=2, n_max=4, num_dims=2,
                           epochs=100, iters=200, eps_decay_epochs=60),
    "preset-16x16": dict(**_DESK, topology="clustered", M=16, L=16, B=1, n_max=4, num_clusters=4,
                         intra_cluster_corr=0.9, num_dims=2, epochs=100, iters=200, eps_decay_epochs=60),
    # Gauss-Markov fading around a random snapshot
    "preset-8x8-mobile": dict(**_DESK, topology="mobile", M=8, L=8, B=1, n_max=4, temporal_corr=0.9, num_dims=2,
                              epochs=100, iters=200, eps_decay_epochs=60),
}


def coerce(key: str, value):
    """Convert a string (or already-typed value) to the type of field ``key``."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    default = getattr(_DEFAULTS, key)
    if not isinstance(value, str):
        return tuple(value) if isinstance(default, tuple) else value
    text = value.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            return tuple(int(t) for t in items) if key == "hidden" else tuple(items)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return text


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = value if key == "preset" else coerce(key, value)
    return out


def load_config(config=None, overrides: dict | None = None) -> ExperimentConfig:
    """``config`` is a preset name, a path to a config file, or None."""
    values = {}
    if config:
        if config in PRESETS:
            values.update(PRESETS[config])
        else:
            path = Path(config)
            if not path.is_file():
                raise ConfigError(f"{config!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
            text = path.read_text()
            parsed = parse_config_text(text)
            preset = parsed.pop("preset", None)
            if preset:
                if preset not in PRESETS:
                    raise ConfigError(f"unknown preset {preset!r}")
                values.update(PRESETS[preset])
            values.update(parsed)
    for k, v in (overrides or {}).items():
        values[k.replace("-", "_")] = coerce(k.replace("-", "_"), v)
    values = {k: coerce(k, v) for k, v in values.items()}
    return replace(_DEFAULTS, **values).validate()
