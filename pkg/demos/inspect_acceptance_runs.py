#!/usr/bin/env python3
# Summaries of the cached acceptance training runs (written by the test suite
# into acceptance_runs/).  Prints the table numbers per environment and the
# performance profile at a few thresholds.

from pathlib import Path

import numpy as np

from pdm_rl.harness import load_run_dir
from pdm_rl.report import profile_table, summary_rows

root = Path(__file__).resolve().parents[1] / "acceptance_runs"
runsets = [load_run_dir(p) for p in sorted(root.iterdir()) if (p / "config.json").exists()]
if not runsets:
    raise SystemExit(f"no runs under {root}; run pytest tests/test_acceptance.py first")

baselines = [rs for rs in runsets if rs.config.mode.value == "bp_full"]
for rs, row in zip(runsets, summary_rows(runsets, baselines)):
    print(f"{rs.path.name:>18}  max {row['max_score']:>7}  spread {row['rel_spread_pct']:>6}%  "
          f"score {row.get('score_x', '-')}  spread {row.get('spread_x', '-')}  iter {row.get('iter_x', '-')}")

# %% profiles pooled over CartPole and Acrobot
main = [rs for rs in runsets if rs.config.mask_policy.value == "keep_all" and not rs.config.error_fp]
for label, prof in profile_table(main).items():
    picks = [np.searchsorted(prof.taus, t) for t in (0.25, 0.5, 0.75)]
    cells = "  ".join(f"tau={prof.taus[i]:.2f}: {prof.fraction[i]:.2f} [{prof.lower[i]:.2f}, {prof.upper[i]:.2f}]"
                      for i in picks)
    print(f"{label:>20}  {cells}")
