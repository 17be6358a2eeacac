#!/usr/bin/env python3
# CartPole with REINFORCE, three ways: full backprop, hidden layers trained
# only by the unsupervised distance loss, and frozen random hidden layers.
# A small network and few iterations keep this to a few minutes.

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pdm_rl import harness, metrics
from pdm_rl.config import TrainConfig

ITERATIONS = 1000
curves = {}
for mode in ("bp_full", "local_u", "frozen_random"):
    cfg = TrainConfig(env="cartpole", algorithm="reinforce", mode=mode,
                      iterations=ITERATIONS, seeds=[0])
    records = harness.run(cfg)
    curves[mode] = [r.scores for r in records]
    row = metrics.summarize(curves[mode])
    print(f"{mode:>14}: best 100-iteration mean {row.max_score:6.1f} at iteration {row.best_iter}")

# %% the two local-vs-BP multipliers, as in a results table
cmp = metrics.summary_table(curves["bp_full"], curves["local_u"])
print(f"score {cmp.score_x:.2f}x  spread {cmp.spread_x:.2f}x  iteration {cmp.iter_x:.2f}x")

# %% plot
fig, ax = plt.subplots(figsize=(6, 4))
for mode, runs in curves.items():
    mean, lo, hi = metrics.mean_curve(runs)
    x = np.arange(mean.size)
    ax.plot(x, mean, label=mode)
    ax.fill_between(x, lo, hi, alpha=0.2)
ax.set_xlabel("iteration")
ax.set_ylabel("episode return (100-iteration mean)")
ax.legend()
fig.tight_layout()
fig.savefig("cartpole_local_vs_bp.png", dpi=120)
print("wrote cartpole_local_vs_bp.png")
