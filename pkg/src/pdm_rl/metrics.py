"""Evaluation metrics over sets of training runs.

Scores are per-iteration cumulative rewards.  Curves are smoothed with a
trailing window, profiles use stratified bootstrap intervals, and the summary
table uses Student-t intervals across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats


def smooth(scores, window: int = 100) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` points average what is available."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(scores, dtype=np.float64)
    if x.size == 0 or window == 1:
        return x.copy()
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def percentile(values, q: float) -> float:
    """Percentile with linear interpolation between order statistics."""
    return float(np.percentile(np.asarray(values, dtype=np.float64), q, method="linear"))


@dataclass
class Normalization:
    low: float
    high: float
    degenerate: bool

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.degenerate:
            return np.zeros_like(x)
        return (x - self.low) / (self.high - self.low)


def score_normalization(curves: Sequence, lo_q: float = 5.0, hi_q: float = 95.0) -> Normalization:
    """Pooled 5th/95th percentiles of a set of (already smoothed) score curves."""
    pooled = np.concatenate([np.asarray(c, dtype=np.float64).ravel() for c in curves])
    lo, hi = percentile(pooled, lo_q), percentile(pooled, hi_q)
    return Normalization(lo, hi, degenerate=bool(hi == lo))


def normalized_scores(runs: Mapping[str, Sequence], window: int = 100):
    """Smooth every run, then min-max normalize with pooled percentiles.

    ``runs`` maps a method label to a list of raw score vectors, all from the
    same environment.  Returns ``(normalized, normalization)`` where
    ``normalized`` has the same structure as ``runs``.
    """
    smoothed = {k: [smooth(r, window) for r in v] for k, v in runs.items()}
    norm = score_normalization([c for v in smoothed.values() for c in v])
    return {k: [norm.apply(c) for c in v] for k, v in smoothed.items()}, norm


def run_peak_scores(runs: Mapping[str, Sequence], window: int = 100) -> dict[str, np.ndarray]:
    """Per-run peak of the smoothed score, min-max normalized over all methods.

    This is the per-run quantity the performance profiles are drawn from.
    """
    peaks = {k: np.array([smooth(r, window).max() for r in v]) for k, v in runs.items()}
    pooled = np.concatenate(list(peaks.values()))
    lo, hi = pooled.min(), pooled.max()
    if hi == lo:
        return {k: np.ones_like(v) for k, v in peaks.items()}
    return {k: (v - lo) / (hi - lo) for k, v in peaks.items()}


@dataclass
class Profile:
    taus: np.ndarray
    fraction: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def performance_profile(scores_by_env: Mapping[str, Sequence[float]], taus,
                        n_boot: int = 2000, seed: int = 0, ci: float = 0.95) -> Profile:
    """Fraction of runs whose normalized score exceeds each threshold.

    The interval is a pointwise percentile bootstrap that resamples runs with
    replacement separately within each environment.
    """
    taus = np.asarray(taus, dtype=np.float64)
    groups = [np.asarray(v, dtype=np.float64) for v in scores_by_env.values() if len(v)]
    if not groups:
        raise ValueError("no runs to profile")
    total = sum(len(g) for g in groups)
    pooled = np.concatenate(groups)
    fraction = (pooled[:, None] > taus[None, :]).sum(axis=0) / total

    rng = np.random.default_rng(seed)
    counts = np.zeros((n_boot, taus.size))
    for g in groups:
        idx = rng.integers(0, len(g), size=(n_boot, len(g)))
        counts += (g[idx][:, :, None] > taus[None, None, :]).sum(axis=1)
    boot = counts / total
    alpha = (1.0 - ci) / 2.0
    lower = np.percentile(boot, 100 * alpha, axis=0, method="linear")
    upper = np.percentile(boot, 100 * (1 - alpha), axis=0, method="linear")
    return Profile(taus, fraction, lower, upper)


def t_interval(samples, ci: float = 0.95) -> tuple[float, float]:
    """Student-t confidence interval for the mean; degenerate for n < 2."""
    x = np.asarray(samples, dtype=np.float64)
    m = float(x.mean())
    if x.size < 2:
        return m, m
    half = float(stats.t.ppf(0.5 + ci / 2, x.size - 1) * x.std(ddof=1) / np.sqrt(x.size))
    return m - half, m + half


def mean_curve(runs: Sequence, window: int = 100) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Across-run mean of smoothed scores with a pointwise 95% t band."""
    curves = np.vstack([smooth(r, window) for r in runs])
    mean = curves.mean(axis=0)
    if curves.shape[0] < 2:
        return mean, mean.copy(), mean.copy()
    half = stats.t.ppf(0.975, curves.shape[0] - 1) * curves.std(axis=0, ddof=1) / np.sqrt(curves.shape[0])
    return mean, mean - half, mean + half


@dataclass
class SummaryRow:
    max_score: float
    rel_spread: float  # percent
    rel_iter: int
    best_iter: int


@dataclass
class Comparison:
    baseline: SummaryRow
    candidate: SummaryRow
    score_x: float
    spread_x: float
    iter_x: float


def summarize(runs: Sequence, window: int = 100, match_level: float | None = None) -> SummaryRow:
    """Peak of the across-run mean curve, its relative 95% CI width, and when it happened.

    With ``match_level`` the reported iteration is the first one where the mean
    curve reaches that level (falling back to the own peak if it never does).
    """
    curves = np.vstack([smooth(r, window) for r in runs])
    mean = curves.mean(axis=0)
    best = int(np.argmax(mean))
    max_score = float(mean[best])
    lo, hi = t_interval(curves[:, best])
    spread = (hi - lo) / abs(max_score) * 100.0 if max_score != 0 else float("nan")
    rel_iter = best
    if match_level is not None:
        hits = np.flatnonzero(mean >= match_level)
        if hits.size:
            rel_iter = int(hits[0])
    return SummaryRow(max_score, float(spread), rel_iter, best)


def _ratio(c: float, b: float) -> float:
    if c == b:
        return 1.0
    if b == 0:
        return float("inf")
    return c / b


def score_ratio(candidate: float, baseline: float) -> float:
    """Improvement factor of a score; for negative rewards less negative is better."""
    if candidate < 0 and baseline < 0:
        return _ratio(baseline, candidate)
    return _ratio(candidate, baseline)


def summary_table(baseline_runs: Sequence, candidate_runs: Sequence, window: int = 100) -> Comparison:
    if not len(baseline_runs) or not len(candidate_runs):
        raise ValueError("both run sets must be nonempty")
    base = summarize(baseline_runs, window)
    cand = summarize(candidate_runs, window, match_level=base.max_score)
    return Comparison(
        baseline=base,
        candidate=cand,
        score_x=score_ratio(cand.max_score, base.max_score),
        spread_x=_ratio(cand.rel_spread, base.rel_spread),
        iter_x=_ratio(cand.rel_iter, base.rel_iter),
    )
