"""Train, evaluate, compare and time schedulers on one shared channel trace."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..channel import generate, load_trace, load_trace_csv
from ..drl import SmartAgent, SmartScheduler, epsilon_schedule, load_checkpoint, save_checkpoint
from ..env import MetricsLog, SchedulingEnv, agent_step
from ..schedulers import CLASSICAL, ActionSpaceTooLarge, OptPF
from .config import SMART, ConfigError, ExperimentConfig

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("epoch", "epsilon", "mean_reward", "mean_norm_se", "final_jfi", "alpha", "clamp_count")
SUMMARY_COLUMNS = ("scheduler", "se_mean", "se_min", "se_max", "se_std", "jfi_mean", "jfi_min", "jfi_max",
                   "jfi_std", "reward_mean", "final_jfi", "sec_per_tti")


class TrainingDiverged(RuntimeError):
    pass


def _stats(x) -> tuple[float, float, float, float]:
    """mean, min, max, std; the mean is clipped so rounding never puts it outside [min, max]."""
    lo, hi = float(np.min(x)), float(np.max(x))
    return min(max(float(np.mean(x)), lo), hi), lo, hi, float(np.std(x))


def build_trace(cfg: ExperimentConfig):
    if cfg.trace:
        path = Path(cfg.trace)
        trace = load_trace_csv(path, cfg.noise_var) if path.suffix == ".csv" else load_trace(path)
        if (trace.num_bs_antennas, trace.num_users, trace.num_rbs) != (cfg.M, cfg.L, cfg.B):
            raise ConfigError(f"trace has M, L, B = {trace.num_bs_antennas}, {trace.num_users}, "
                              f"{trace.num_rbs}; config says {cfg.M}, {cfg.L}, {cfg.B}")
        return trace
    return generate(cfg.scenario(), cfg.M, cfg.L, cfg.B, cfg.num_ttis)


def make_env(cfg: ExperimentConfig, trace, start_tti: int = 0) -> SchedulingEnv:
    return SchedulingEnv(trace, cfg.n_max, beta=cfg.beta, c_th=cfg.c_th, group_seed=cfg.group_seed,
                         start_tti=start_tti)


def make_agents(cfg: ExperimentConfig) -> list[SmartAgent]:
    return [SmartAgent(cfg.L, cfg.n_max, num_dims=cfg.num_dims or None, max_dim_size=cfg.max_dim_size,
                       k=cfg.k, hidden=cfg.hidden, batch_size=cfg.batch_size,
                       buffer_capacity=cfg.buffer_capacity, min_fill=cfg.min_fill,
                       updates_per_step=cfg.updates_per_step, seed=cfg.seed * 1009 + b, gamma=cfg.gamma,
                       tau=cfg.tau, actor_lr=cfg.actor_lr, critic_lr=cfg.critic_lr, alpha_lr=cfg.alpha_lr)
            for b in range(cfg.B)]


def make_scheduler(cfg: ExperimentConfig, name: str):
    if name == "opt-pf":
        return OptPF(fixed_rates=cfg.pf_fixed_rates)
    if name in ("approx-pf", "rr-ug"):
        return CLASSICAL[name](c_th=cfg.c_th, seed=cfg.group_seed)
    if name == "random":
        return CLASSICAL[name](seed=cfg.seed)
    return CLASSICAL[name]()


def _write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _finite(agents) -> bool:
    for a in agents:
        for name, net in a.sac._nets().items():
            if not all(np.all(np.isfinite(p)) for p in net.params):
                return False
        if not np.isfinite(a.sac.log_alpha[0]):
            return False
    return True


# --- training -------------------------------------------------------------------------

@dataclass
class TrainResult:
    agents: list
    curve: list
    checkpoint: Path | None = None
    trace: object = None


def train(cfg: ExperimentConfig, out_dir=None, resume=None, stop_after: int | None = None,
          trace=None) -> TrainResult:
    """Train one SMART agent per RB; writes ``curve.csv`` and ``checkpoint.npz`` under ``out_dir``.

    ``resume`` continues from a checkpoint written by an earlier call, giving the
    same curve as an uninterrupted run. ``stop_after`` ends after that many
    epochs (counted from zero), which is how interrupted runs are produced.
    """
    trace = build_trace(cfg) if trace is None else trace
    env = make_env(cfg, trace)
    agents = make_agents(cfg)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    curve, start = [], 0
    if resume is not None:
        meta, extra = load_checkpoint(resume, agents)
        start = int(meta["epoch"])
        env.t = int(meta["tti"])
        env.ledger.p[...] = extra["ledger"]
        curve = [tuple(r) for r in extra["curve"].tolist()]
        curve = [(int(r[0]),) + tuple(r[1:6]) + (int(r[6]),) for r in curve]
    end = cfg.epochs if stop_after is None else min(cfg.epochs, stop_after)
    ckpt = out_dir / "checkpoint.npz" if out_dir is not None else None

    def save(epoch):
        if ckpt is None:
            return
        meta = {"epoch": epoch, "tti": env.t, "config": cfg.to_text()}
        extra = {"ledger": env.ledger.p.copy(),
                 "curve": np.array(curve, dtype=float).reshape(len(curve), len(CURVE_COLUMNS))}
        save_checkpoint(ckpt, agents, meta, extra)

    for epoch in range(start, end):
        eps = epsilon_schedule(epoch, cfg.eps_decay_epochs)
        if cfg.reset_ledger:
            env.reset()
        rewards, se, clamps = [], [], 0
        for _ in range(cfg.iters):
            out = agent_step(agents, env, cfg.mode, eps, learn=True)
            rewards.append(out.reward if cfg.mode == "ma" else float(np.mean(out.rb_rewards)))
            se.append(out.norm_se)
            clamps += int(np.sum(out.clamp_counts))
        if not _finite(agents):
            raise TrainingDiverged(f"non-finite network parameters after epoch {epoch} "
                                   f"(alpha={agents[0].sac.alpha:.3g}); lower the learning rates")
        curve.append((epoch, eps, float(np.mean(rewards)), float(np.mean(se)), out.jfi,
                      agents[0].sac.alpha, clamps))
        log.info("epoch %d eps=%.3f reward=%.4f se=%.4f jfi=%.4f", epoch, eps, curve[-1][2], curve[-1][3],
                 out.jfi)
        if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save(epoch + 1)
    save(end)
    if out_dir is not None:
        _write_rows(out_dir / "curve.csv", CURVE_COLUMNS, curve)
    return TrainResult(agents, curve, ckpt, trace)


# --- evaluation -----------------------------------------------------------------------

@dataclass
class SchedulerRun:
    name: str
    norm_se: np.ndarray
    jfi: np.ndarray
    reward: np.ndarray
    latency: np.ndarray
    metrics: MetricsLog = field(repr=False, default=None)

    def summary_row(self) -> tuple:
        return (self.name, *_stats(self.norm_se), *_stats(self.jfi), float(self.reward.mean()),
                float(self.jfi[-1]), float(np.median(self.latency)))


@dataclass
class RunSummary:
    runs: dict

    def rows(self) -> list[tuple]:
        return [r.summary_row() for r in self.runs.values()]

    def row(self, name) -> dict:
        return dict(zip(SUMMARY_COLUMNS, self.runs[name].summary_row()))

    def to_csv(self, path):
        _write_rows(path, SUMMARY_COLUMNS, self.rows())

    def table(self) -> str:
        head = ("scheduler", "SE mean", "SE min", "SE max", "JFI mean", "JFI min", "JFI max", "ms/TTI")
        body = [(r[0], f"{r[1]:.4f}", f"{r[2]:.4f}", f"{r[3]:.4f}", f"{r[5]:.4f}", f"{r[6]:.4f}",
                 f"{r[7]:.4f}", f"{1e3 * r[11]:.3f}") for r in self.rows()]
        widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
        fmt = lambda row: "  ".join(str(x).ljust(w) if i == 0 else str(x).rjust(w)
                                    for i, (x, w) in enumerate(zip(row, widths)))
        return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(r) for r in body])


def run_scheduler(cfg: ExperimentConfig, trace, name: str, agents=None, online_updates: bool = False,
                  num_ttis: int | None = None, start_tti: int | None = None) -> SchedulerRun:
    """Score one scheduler over the evaluation window with a fresh ledger.

    Latency covers the decision only: state assembly (including grouping) for
    SMART and the scheduler call for everyone; trace generation is excluded.
    """
    n = cfg.eval_ttis if num_ttis is None else num_ttis
    env = make_env(cfg, trace, cfg.eval_start_tti if start_tti is None else start_tti)
    smart = name == SMART
    if smart:
        if agents is None:
            raise ConfigError("SMART needs trained agents or a checkpoint")
        sched = SmartScheduler(agents, cfg.mode, epsilon=0.0, online_updates=online_updates)
    else:
        sched = make_scheduler(cfg, name)
    sched.reset()
    metrics = MetricsLog()
    se, fair, rew, lat = (np.zeros(n) for _ in range(4))
    for i in range(n):
        if smart:
            t0 = time.perf_counter()
            states = env.observe_all()
            ctx = env.context()
            ctx.extra["states"] = states
            decisions = sched.schedule(ctx)
            lat[i] = time.perf_counter() - t0
        else:
            ctx = env.context()
            t0 = time.perf_counter()
            decisions = sched.schedule(ctx)
            lat[i] = time.perf_counter() - t0
        out = env.step(decisions, clamp_counts=ctx.extra.get("clamp_counts"))
        if smart and online_updates:
            ctx.extra["next_states"] = env.observe_all()
            sched.feedback(ctx, decisions, out)
        metrics.add(out, cfg.mode if smart else "ma")
        se[i], fair[i], rew[i] = out.norm_se, out.jfi, out.reward
    return SchedulerRun(name, se, fair, rew, lat, metrics)


def load_agents(cfg: ExperimentConfig, checkpoint) -> list[SmartAgent]:
    if checkpoint is None or not Path(checkpoint).is_file():
        raise ConfigError(f"SMART evaluation needs a checkpoint file, got {checkpoint!r}")
    agents = make_agents(cfg)
    load_checkpoint(checkpoint, agents)
    return agents


def evaluate(cfg: ExperimentConfig, checkpoint=None, agents=None, schedulers=None, online_updates=None,
             out_dir=None, trace=None) -> RunSummary:
    """Score every selected scheduler on the same trace window.

    Writes ``tti_<name>.csv`` per scheduler and ``summary.csv`` under ``out_dir``.
    """
    names = tuple(schedulers or cfg.schedulers)
    online = cfg.online_updates if online_updates is None else online_updates
    if SMART in names and agents is None:
        agents = load_agents(cfg, checkpoint)
    trace = build_trace(cfg) if trace is None else trace
    runs = {}
    for name in names:
        runs[name] = run_scheduler(cfg, trace, name, agents if name == SMART else None, online)
    summary = RunSummary(runs)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, run in runs.items():
            run.metrics.to_csv(out_dir / f"tti_{name}.csv")
        summary.to_csv(out_dir / "summary.csv")
    return summary


def compare(cfg: ExperimentConfig, checkpoint=None, agents=None, schedulers=None, out_dir=None,
            trace=None) -> RunSummary:
    names = tuple(schedulers or cfg.schedulers)
    if len(names) < 2:
        raise ConfigError("compare needs at least two schedulers")
    summary = evaluate(cfg, checkpoint, agents, names, out_dir=out_dir, trace=trace)
    if out_dir is not None:
        (Path(out_dir) / "summary.txt").write_text(summary.table() + "\n")
    return summary


def bench_timing(cfg: ExperimentConfig, schedulers=None, agents=None, num_ttis=None, trace=None) -> dict:
    """Median per-TTI decision latency (seconds) per scheduler, single-threaded.

    Schedulers whose exhaustive search exceeds the enumeration limit map to None.
    Without trained agents SMART is timed with freshly initialised ones, which
    costs the same per decision.
    """
    n = max(100, cfg.bench_ttis if num_ttis is None else num_ttis)
    trace = build_trace(cfg) if trace is None else trace
    out = {}
    for name in tuple(schedulers or cfg.schedulers):
        ag = (agents or make_agents(cfg)) if name == SMART else None
        try:
            run = run_scheduler(cfg, trace, name, ag, num_ttis=n)
        except ActionSpaceTooLarge:
            out[name] = None
            continue
        out[name] = float(np.median(run.latency))
    return out


def summary_from_csv(path) -> dict:
    """Recompute SE and JFI aggregates from a per-TTI metrics CSV."""
    from ..env import read_metrics_csv
    rows = read_metrics_csv(path)
    by_tti = {}
    for r in rows:
        by_tti.setdefault(r["tti"], []).append(r)
    se = np.array([np.mean([r["norm_sum_rate"] for r in rs]) for rs in by_tti.values()])
    j = np.array([rs[0]["jfi"] for rs in by_tti.values()])
    out = dict(zip(("se_mean", "se_min", "se_max", "se_std"), _stats(se)))
    out.update(zip(("jfi_mean", "jfi_min", "jfi_max", "jfi_std"), _stats(j)))
    out["final_jfi"] = float(j[-1])
    return out
