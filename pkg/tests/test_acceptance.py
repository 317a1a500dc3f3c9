"""Acceptance suite. Every criterion prints one PASS/FAIL line (also repeated in
the terminal summary). Learning criteria train real agents and take a while.

Training runs are cached per module so criteria that share a trained model
(mobility and offline-vs-online evaluation) train it once. Seed loops stop
as soon as the 2-of-3 outcome is decided.
"""
import copy
import time

import numpy as np
import pytest

from mmsched.channel import ChannelTrace, gen_random_static, make_rng
from mmsched.codec import ActionCodec, count_actions
from mmsched.drl import SacAgent, SmartAgent, SmartScheduler
from mmsched.env import SchedulingEnv, agent_step
from mmsched.harness import evaluate, load_config, run_scheduler, train
from mmsched.phy import achieved_rates, zf_beamformer
from mmsched.schedulers import (ApproxPF, OptMR, OptPF, RandomScheduler, RRUG, TTIContext, opt_pf_schedule,
                                pf_objective)

SEEDS = (0, 1, 2)


def _cn(rng, m, n):
    return (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)


# --- bounds are checked on every environment step taken anywhere in this module -------------

_BOUNDS = {"steps": 0, "violations": 0, "worst": ""}


@pytest.fixture(autouse=True)
def _watch_bounds(monkeypatch):
    original = SchedulingEnv.step

    def checked(self, decisions, clamp_counts=None):
        out = original(self, decisions, clamp_counts)
        _BOUNDS["steps"] += 1
        values = [out.reward, *out.rb_rewards]
        if not (1.0 / self.num_users <= out.jfi <= 1.0) or not all(0.0 <= v <= 1.0 for v in values):
            _BOUNDS["violations"] += 1
            _BOUNDS["worst"] = f"jfi={out.jfi!r} rewards={values!r} at t={out.tti}"
        return out

    monkeypatch.setattr(SchedulingEnv, "step", checked)


def two_of_three(run_seed):
    """Runs seeds until two pass or two fail; returns (passed, per-seed details)."""
    wins, losses, details = 0, 0, []
    for seed in SEEDS:
        ok, detail = run_seed(seed)
        details.append(f"seed {seed}: {'ok' if ok else 'no'} ({detail})")
        wins += ok
        losses += not ok
        if wins == 2 or losses == 2:
            break
    return wins >= 2, "; ".join(details)


# --- oracle and property criteria -----------------------------------------------------------

def brute_force_pf(h, noise_var, totals, n_max):
    """Bitmask enumeration, rates from an explicit pseudo-inverse beamformer,
    ties to fewer users then the lexicographically smallest subset."""
    num_users = h.shape[1]
    best_key, best = None, None
    for mask in range(1, 1 << num_users):
        subset = tuple(u for u in range(num_users) if mask >> u & 1)
        if len(subset) > n_max:
            continue
        w = np.linalg.pinv(h[:, subset]).conj().T
        sinr = 1.0 / (noise_var * np.sum(np.abs(w) ** 2, axis=0))
        key = (-float(np.sum(np.log2(1 + sinr) / totals[list(subset)])), len(subset), subset)
        if best_key is None or key < best_key:
            best_key, best = key, subset
    return best


def test_oracle_equivalence(report):
    rng = make_rng(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        h = _cn(rng, 8, 8)
        totals = rng.uniform(1e-3, 10.0, 8)
        ours = opt_pf_schedule(totals, lambda s: achieved_rates(h, s, 0.16)[0], 8, 4)
        mismatches += ours != brute_force_pf(h, 0.16, totals, 4)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    report("oracle equivalence", ok, f"{mismatches} mismatches in 200 instances, {elapsed:.1f} s")
    assert ok


def test_dominance_suite(report):
    rng = make_rng(77)
    agent_cache = {}
    violations = []
    for t in range(500):
        l = int(rng.integers(2, 11))
        n_max = int(rng.integers(1, min(l, 4) + 1))
        m = int(rng.integers(n_max, 11))
        h = _cn(rng, m, l)
        ctx = TTIContext(h[None], 0.16, rng.uniform(1e-3, 5.0, l), n_max, tti=t)
        fn = ctx.rates_fn(0)
        picks = {s.name: s.schedule(ctx)[0] for s in (OptMR(), OptPF(), ApproxPF(seed=t), RRUG(seed=t),
                                                       RandomScheduler(seed=t))}
        key = (l, n_max)
        if key not in agent_cache:
            agent_cache[key] = SmartAgent(l, n_max, hidden=(16, 16), seed=len(agent_cache))
        state = rng.uniform(0, 1, 3 * l)
        picks["smart"] = SmartScheduler([agent_cache[key]]).schedule(
            TTIContext(h[None], 0.16, ctx.totals, n_max, extra={"states": [state]}))[0]
        mr = float(np.sum(fn(picks["opt-mr"])))
        pf = pf_objective(picks["opt-pf"], fn, ctx.totals)
        for name, s in picks.items():
            if not float(np.sum(fn(s))) <= mr:
                violations.append(f"t={t} {name} sum rate")
            if not pf_objective(s, fn, ctx.totals) <= pf:
                violations.append(f"t={t} {name} PF objective")
    ok = not violations
    report("dominance suite", ok, f"{len(violations)} violations over 500 TTIs x 6 schedulers"
           + (f" (first: {violations[0]})" if violations else ""))
    assert ok


def test_zf_correctness(report):
    rng = make_rng(5)
    worst, count = 0.0, 0
    while count < 10_000:
        n = int(rng.integers(1, 9))
        m = int(rng.integers(n, 33))
        h = _cn(rng, m, n)
        if np.linalg.cond(h) > 1e3:
            continue
        w = zf_beamformer(h)
        worst = max(worst, float(np.max(np.abs(w.conj().T @ h - np.eye(n)))))
        count += 1
    ok = worst < 1e-9
    report("ZF correctness", ok, f"max |W^H H - I| = {worst:.2e} over 10^4 instances")
    assert ok


def test_codec_round_trips(report):
    problems = []
    for l, n, expected in ((6, 3, 41), (4, 2, 10)):
        c = ActionCodec(l, n)
        if c.num_actions != expected:
            problems.append(f"A({l},{n})={c.num_actions}")
        for k in range(c.num_actions):
            if c.subset_to_index(c.index_to_subset(k)) != k:
                problems.append(f"round trip ({l},{n}) k={k}")
    big = ActionCodec(64, 16, dim_sizes=(256,) * 8)
    rng = make_rng(3)
    for _ in range(10_000):
        k = int(rng.integers(big.num_actions))
        if big.dim_join(big.dim_split(k)) != k:
            problems.append(f"dim round trip k={k}")
    ok = not problems
    report("codec round trips", ok, "exhaustive L=6/N=3 (41) and L=4/N=2 (10); 10^4 D=8x256 split/join"
           + (f"; problems: {problems[:3]}" if problems else ""))
    assert ok


@pytest.mark.xfail(strict=True, reason="exact count 7.1325e14 is 1.89% from 7e14; the 1% bound cannot hold "
                                       "for a correct count (see README)")
def test_codec_action_count_64_16(report):
    a = count_actions(64, 16)
    rel = abs(a / 7e14 - 1)
    ok = rel < 0.01
    report("codec A(64,16) within 1% of 7e14", ok, f"A = {a} ({a:.4e}), relative gap {rel:.2%}")
    assert ok


def _rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    d = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if d == 0 else float(np.linalg.norm(a - b) / d)


def _fd(f, p, h=1e-5):
    g = np.zeros_like(p)
    for i in np.ndindex(p.shape):
        old = p[i]
        p[i] = old + h
        up = f()
        p[i] = old - h
        down = f()
        p[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def test_gradient_checks(report):
    t0 = time.perf_counter()
    agent = SacAgent(6, 2, hidden=(64, 64), seed=11, init_alpha=0.4)
    rng = make_rng(12)
    n = 6
    batch = {"obs": rng.standard_normal((n, 6)), "act": rng.uniform(-1, 1, (n, 2)), "rew": rng.uniform(0, 1, n),
             "next_obs": rng.standard_normal((n, 6)), "done": np.zeros(n)}
    nn = rng.standard_normal((n, 2))
    noise = rng.standard_normal((n, 2))
    worst = {}
    _, (g1, g2), _ = agent.critic_loss_grads(batch, nn)
    for net, grads, idx, tag in ((agent.q1, g1, 0, "q1"), (agent.q2, g2, 1, "q2")):
        for j, (p, g) in enumerate(zip(net.params, grads)):
            worst[f"{tag}[{j}]"] = _rel_err(g, _fd(lambda: agent.critic_loss_grads(batch, nn)[0][idx], p))
    _, ga, logp = agent.actor_loss_grads(batch["obs"], noise)
    for j, (p, g) in enumerate(zip(agent.actor.params, ga)):
        worst[f"actor[{j}]"] = _rel_err(g, _fd(lambda: agent.actor_loss_grads(batch["obs"], noise)[0], p))
    _, galpha = agent.alpha_loss_grad(logp)
    worst["log_alpha"] = _rel_err(galpha, _fd(lambda: agent.alpha_loss_grad(logp)[0], agent.log_alpha))
    elapsed = time.perf_counter() - t0
    name, err = max(worst.items(), key=lambda kv: kv[1])
    ok = err < 1e-4 and elapsed < 60
    report("gradient checks", ok, f"{len(worst)} tensors, worst relative error {err:.1e} ({name}), "
           f"{elapsed:.1f} s")
    assert ok


def test_fairness_floor_of_opt_mr(report):
    base = gen_random_static(8, 8, 1, 1, seed=3)
    h = base.h.copy()
    h[..., 0] *= np.sqrt(10.0)   # user 0 at 10x the power gain
    trace = ChannelTrace(h, base.noise_var)
    cfg = load_config("preset-4x4", {"M": "8", "L": "8", "n_max": "4", "eval_ttis": "400"})
    mr = run_scheduler(cfg, trace, "opt-mr").jfi[-1]
    pf = run_scheduler(cfg, trace, "opt-pf").jfi[-1]
    ok = mr < pf
    report("fairness floor of Opt-MR", ok, f"JFI after 400 TTIs: Opt-MR {mr:.4f} vs Opt-PF {pf:.4f}")
    assert ok


# --- learning criteria ----------------------------------------------------------------------

_TRAINED = {}


def trained(preset, seed, **overrides):
    key = (preset, seed, tuple(sorted(overrides.items())))
    if key not in _TRAINED:
        cfg = load_config(preset, {"seed": str(seed), **{k: str(v) for k, v in overrides.items()}})
        _TRAINED[key] = (cfg, train(cfg))
    return _TRAINED[key]


def test_learning_4x4(report):
    def run(seed):
        cfg, res = trained("preset-4x4", seed)
        last = res.curve[-20:]
        smart = float(np.mean([r[2] for r in last]))
        final_jfi = res.curve[-1][4]
        env = SchedulingEnv(res.trace, cfg.n_max, cfg.beta, cfg.c_th, cfg.group_seed)
        sched = OptPF()
        rewards = []
        for _ in range(cfg.iters):   # same episode as training: fresh ledger, iters TTIs
            out = env.step(sched.schedule(env.context()))
            rewards.append(out.reward)
        pf = float(np.mean(rewards))
        ok = smart >= 0.9 * pf and final_jfi >= 0.9
        return ok, f"reward {smart:.4f} vs 0.9 x Opt-PF {0.9 * pf:.4f}, final JFI {final_jfi:.4f}"

    ok, detail = two_of_three(run)
    report("learning 4x4", ok, detail)
    assert ok


def test_mobility_robustness(report):
    def run(seed):
        cfg, res = trained("preset-8x8-mobile", seed)
        # SMART keeps learning on the test window, the protocol of the headline comparisons
        s = evaluate(cfg, agents=copy.deepcopy(res.agents), schedulers=("smart", "rr-ug"), trace=res.trace,
                     online_updates=True)
        sm, rr = s.row("smart"), s.row("rr-ug")
        ok = sm["se_mean"] >= 1.1 * rr["se_mean"] and sm["jfi_mean"] >= rr["jfi_mean"]
        return ok, (f"SE {sm['se_mean']:.4f} vs 1.1 x RR-UG {1.1 * rr['se_mean']:.4f}, "
                    f"JFI {sm['jfi_mean']:.4f} vs RR-UG {rr['jfi_mean']:.4f}")

    ok, detail = two_of_three(run)
    report("mobility robustness", ok, detail)
    assert ok


def test_multi_rb_degeneracy(report):
    kw = {"B": "1", "epochs": "3", "iters": "60", "min_fill": "32", "batch_size": "32", "eps_decay_epochs": "2"}
    curves, actions = {}, {}
    for mode in ("sa", "ma"):
        cfg = load_config("preset-8x8-2rb", {**kw, "mode": mode, "seed": "4"})
        res = train(cfg)
        curves[mode] = res.curve
        env = SchedulingEnv(res.trace, cfg.n_max, cfg.beta, cfg.c_th, cfg.group_seed)
        actions[mode] = [agent_step(res.agents, env, mode, 0.0, learn=True).decisions for _ in range(50)]
    identical = curves["sa"] == curves["ma"] and actions["sa"] == actions["ma"]

    def run(seed):
        rows = {}
        for mode in ("sa", "ma"):
            cfg, res = trained("preset-8x8-2rb", seed, mode=mode)
            rows[mode] = evaluate(cfg, agents=copy.deepcopy(res.agents), schedulers=("smart",), trace=res.trace,
                                  online_updates=True).row("smart")
        sa, ma = rows["sa"], rows["ma"]
        ok = sa["se_mean"] >= ma["se_mean"] and min(sa["jfi_mean"], ma["jfi_mean"]) >= 0.9
        return ok, (f"SE SA {sa['se_mean']:.4f} vs MA {ma['se_mean']:.4f}, "
                    f"JFI SA {sa['jfi_mean']:.4f} MA {ma['jfi_mean']:.4f}")

    ok2, detail = two_of_three(run)
    ok = identical and ok2
    report("multi-RB degeneracy", ok, f"B=1 SA/MA bit-identical: {identical}; B=2: {detail}")
    assert ok


def test_offline_vs_online(report):
    cfg, res = trained("preset-8x8-mobile", 0)
    frozen = evaluate(cfg, agents=copy.deepcopy(res.agents), schedulers=("smart",), trace=res.trace)
    online = evaluate(cfg, agents=copy.deepcopy(res.agents), schedulers=("smart",), trace=res.trace,
                      online_updates=True)
    a, b = frozen.row("smart")["se_mean"], online.row("smart")["se_mean"]
    rel = abs(b - a) / a
    ok = rel < 0.1
    report("offline vs online", ok, f"mean SE frozen {a:.4f}, online {b:.4f}, relative change {rel:.2%}")
    assert ok


def test_jfi_and_reward_bounds(report):
    # runs last in this module, after every other criterion has driven the environment
    steps, bad = _BOUNDS["steps"], _BOUNDS["violations"]
    ok = bad == 0 and steps > 0
    report("JFI/reward bounds", ok, f"{bad} violations over {steps} environment steps"
           + (f" ({_BOUNDS['worst']})" if bad else ""))
    assert ok
