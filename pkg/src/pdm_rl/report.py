"""Summary tables, performance profiles and learning-curve plots from run directories."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import metrics
from .harness import RunSet, load_run_dir

TAUS = np.round(np.linspace(0.0, 1.0, 101), 10)

SUMMARY_COLUMNS = ["env", "algorithm", "mode", "n_runs", "attrition", "max_score",
                   "rel_spread_pct", "rel_iter", "score_x", "spread_x", "iter_x", "baseline"]


def _fmt_x(v: float) -> str:
    return "" if v is None else f"{v:.2f}x"


def summary_rows(runsets: list[RunSet], baselines: list[RunSet]) -> list[dict]:
    """One row per run set, compared against the baseline of the same env and algorithm."""
    rows = []
    for rs in runsets:
        c = rs.config
        base = next((b for b in baselines
                     if b.config.env == c.env and b.config.algorithm == c.algorithm), None)
        runs = [r.scores for r in rs.ok]
        row = {"env": c.env, "algorithm": c.algorithm.value, "mode": c.mode.value,
               "n_runs": len(runs), "attrition": rs.attrition}
        if not runs:
            rows.append(row)
            continue
        if base is not None and base.ok:
            cmp = metrics.summary_table([r.scores for r in base.ok], runs)
            s = cmp.candidate
            row.update(score_x=_fmt_x(cmp.score_x), spread_x=_fmt_x(cmp.spread_x),
                       iter_x=_fmt_x(cmp.iter_x), baseline=str(base.path))
        else:
            s = metrics.summarize(runs)
        row.update(max_score=f"{s.max_score:.1f}", rel_spread_pct=f"{s.rel_spread:.2f}",
                   rel_iter=s.rel_iter)
        rows.append(row)
    return rows


def profile_table(runsets: list[RunSet], seed: int = 0) -> dict[str, metrics.Profile]:
    """Performance profile per method label, pooled over environments."""
    by_env: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for rs in runsets:
        by_env[rs.config.env][rs.label].extend(r.scores for r in rs.ok)
    per_method: dict[str, dict[str, np.ndarray]] = defaultdict(dict)
    for env, runs in by_env.items():
        runs = {k: v for k, v in runs.items() if v}
        if not runs:
            continue
        for label, scores in metrics.run_peak_scores(runs).items():
            per_method[label][env] = scores
    return {label: metrics.performance_profile(envs, TAUS, seed=seed)
            for label, envs in sorted(per_method.items())}


def _write_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _plot_bands(path: Path, series: dict[str, tuple], xlabel: str, ylabel: str, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, mean, lo, hi) in series.items():
        ax.plot(x, mean, label=label)
        ax.fill_between(x, lo, hi, alpha=0.25)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def build_report(run_dirs, baseline_dirs, out_dir, seed: int = 0) -> dict:
    """Write summary.csv, profile.csv/svg and per-env normalized curves into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    baselines = [load_run_dir(p) for p in baseline_dirs]
    runsets = baselines + [load_run_dir(p) for p in run_dirs
                           if Path(p).resolve() not in {b.path.resolve() for b in baselines}]

    rows = summary_rows(runsets, baselines)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS,
               [[r.get(k, "") for k in SUMMARY_COLUMNS] for r in rows])

    profiles = profile_table(runsets, seed)
    _write_csv(out / "profile.csv", ["tau", "method", "fraction", "lower", "upper"],
               [[f"{t:.2f}", label, p.fraction[i], p.lower[i], p.upper[i]]
                for label, p in profiles.items() for i, t in enumerate(p.taus)])
    if profiles:
        _plot_bands(out / "profile.svg",
                    {k: (p.taus, p.fraction, p.lower, p.upper) for k, p in profiles.items()},
                    "normalized score threshold", "fraction of runs above", "Performance profile")

    envs = sorted({rs.config.env for rs in runsets})
    for env in envs:
        sets = [rs for rs in runsets if rs.config.env == env and rs.ok]
        if not sets:
            continue
        normed, _ = metrics.normalized_scores({rs.label: [r.scores for r in rs.ok] for rs in sets})
        series, csv_rows = {}, []
        for label, curves in normed.items():
            mean, lo, hi = metrics.mean_curve(curves, window=1)
            x = np.arange(mean.size)
            series[label] = (x, mean, lo, hi)
            csv_rows.extend([label, int(i), mean[i], lo[i], hi[i]] for i in x)
        _write_csv(out / f"curves_{env}.csv", ["method", "iteration", "mean", "lower", "upper"], csv_rows)
        _plot_bands(out / f"curves_{env}.svg", series, "iteration", "normalized score", env)
    return {"rows": rows, "profiles": profiles}
