"""Command line: ``mmsched {gen-trace,train,evaluate,compare,bench}``.

Any config key can be overridden as ``--key value`` (``--hidden 128,128``,
``--topology mobile``); ``--config`` takes a preset name or a config file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..channel import save_trace, save_trace_csv
from .config import PRESETS, ConfigError, load_config
from .experiments import bench_timing, build_trace, compare, evaluate, train


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"preset ({', '.join(PRESETS)}) or key = value file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--schedulers", help="comma-separated scheduler names")
    common.add_argument("--online-updates", action="store_true", default=None,
                        help="keep training SMART during evaluation")
    common.add_argument("--pf-fixed-rates", action="store_true", default=None,
                        help="Opt-PF scores subsets with single-user rates")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mmsched", description="Multi-user MIMO scheduling experiments")
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen-trace", parents=[common], help="generate a channel trace file")
    g.add_argument("--format", choices=("bin", "csv"), default="bin")
    t = sub.add_parser("train", parents=[common], help="train SMART agents")
    t.add_argument("--resume", help="checkpoint to continue from")
    for name, helptext in (("evaluate", "score schedulers on the evaluation window"),
                           ("compare", "side-by-side table of two or more schedulers")):
        e = sub.add_parser(name, parents=[common], help=helptext)
        e.add_argument("--checkpoint", help="SMART checkpoint (needed when 'smart' is selected)")
    b = sub.add_parser("bench", parents=[common], help="median decision latency per TTI")
    b.add_argument("--checkpoint")
    return p


def _overrides(args, extra: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = value
    for key in ("seed", "out", "schedulers", "online_updates", "pf_fixed_rates"):
        value = getattr(args, key)
        if value is not None:
            out[key] = str(value).lower() if isinstance(value, bool) else str(value)
    return out


def main(argv=None) -> int:
    args, extra = _parser().parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args, extra))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "gen-trace":
            trace = build_trace(cfg)
            path = out / ("trace.csv" if args.format == "csv" else "trace.mmtr")
            (save_trace_csv if args.format == "csv" else save_trace)(trace, path)
            print(f"wrote {path} (T={trace.num_ttis}, B={trace.num_rbs}, M={trace.num_bs_antennas}, "
                  f"L={trace.num_users})")
        elif args.command == "train":
            (out / "config.txt").write_text(cfg.to_text())
            res = train(cfg, out, resume=args.resume)
            last = res.curve[-20:]
            mean = sum(r[2] for r in last) / len(last)
            print(f"trained {cfg.epochs} epochs; mean reward over the last {len(last)} epochs {mean:.4f}")
            print(f"wrote {out / 'curve.csv'} and {res.checkpoint}")
        elif args.command in ("evaluate", "compare"):
            fn = compare if args.command == "compare" else evaluate
            summary = fn(cfg, checkpoint=args.checkpoint, out_dir=out)
            print(summary.table())
        elif args.command == "bench":
            agents = None
            if args.checkpoint:
                from .experiments import load_agents
                agents = load_agents(cfg, args.checkpoint)
            timing = bench_timing(cfg, agents=agents)
            (out / "bench.json").write_text(json.dumps(timing, indent=2) + "\n")
            for name, sec in timing.items():
                print(f"{name:10s} " + ("skipped (action space too large)" if sec is None
                                        else f"{1e3 * sec:.3f} ms/TTI"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
