"""Train SMART on the 4x4 preset and compare it against the exhaustive baselines.

A short run (60 epochs) is enough to see the reward climb; the full preset
uses 200 epochs. Pass a number of epochs as the first argument to change it.
"""
import sys

from mmsched.harness import compare, load_config, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 60
cfg = load_config("preset-4x4", {"epochs": str(epochs), "eps_decay_epochs": str(max(1, epochs * 5 // 8))})
res = train(cfg)
for epoch, eps, reward, se, jfi, alpha, clamps in res.curve[:: max(1, epochs // 10)]:
    print(f"epoch {epoch:4d}  eps {eps:.2f}  reward {reward:.3f}  SE {se:.3f}  JFI {jfi:.3f}  alpha {alpha:.3f}")

summary = compare(cfg, agents=res.agents, schedulers=("smart", "opt-pf", "opt-mr", "rr-ug"), trace=res.trace)
print(summary.table())
