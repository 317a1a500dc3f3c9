"""Classical schedulers on a static clustered cell.

Opt-MR piles rate onto the strongest users, Opt-PF trades a little rate for
fairness, RR-UG cycles through compatible groups. Runs in a few seconds.
"""
from mmsched.harness import load_config, compare

cfg = load_config("preset-4x4", {"M": "8", "L": "8", "n_max": "4", "eval_ttis": "400"})
summary = compare(cfg, schedulers=("opt-mr", "opt-pf", "approx-pf", "rr-ug", "random"))
print(summary.table())
