import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdm_rl.metrics import (
    mean_curve,
    normalized_scores,
    percentile,
    performance_profile,
    run_peak_scores,
    score_normalization,
    score_ratio,
    smooth,
    summarize,
    summary_table,
    t_interval,
)


def oracle_percentile(values, q):
    xs = sorted(values)
    pos = (len(xs) - 1) * q / 100
    lo = int(pos)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (xs[hi] - xs[lo]) * (pos - lo)


def test_smooth_examples():
    np.testing.assert_array_equal(smooth([0, 10], 2), [0, 5])
    np.testing.assert_array_equal(smooth([3.0] * 7, 4), [3.0] * 7)
    x = np.random.default_rng(0).normal(size=20)
    np.testing.assert_array_equal(smooth(x, 1), x)
    with pytest.raises(ValueError):
        smooth(x, 0)


def test_smooth_against_loop():
    x = np.random.default_rng(1).normal(size=250)
    expected = [np.mean(x[max(0, i - 99):i + 1]) for i in range(250)]
    np.testing.assert_allclose(smooth(x), expected, rtol=1e-12, atol=1e-12)


def test_percentile_matches_oracle():
    ramp = np.arange(100.0)
    for q in (5, 50, 95, 37.5):
        assert percentile(ramp, q) == pytest.approx(oracle_percentile(ramp.tolist(), q), abs=1e-12)
    assert percentile(ramp, 5) == pytest.approx(4.95)
    assert percentile(ramp, 95) == pytest.approx(94.05)


def test_normalization_endpoints_and_degenerate():
    norm = score_normalization([np.arange(100.0)])
    np.testing.assert_allclose(norm.apply([norm.low, norm.high]), [0.0, 1.0])
    flat = score_normalization([np.full(10, 3.0)])
    assert flat.degenerate
    np.testing.assert_array_equal(flat.apply([3.0, 4.0]), [0.0, 0.0])


def test_normalized_scores_unclamped():
    runs = {"a": [np.arange(100.0)], "b": [np.arange(100.0) * 2]}
    normed, norm = normalized_scores(runs, window=1)
    assert min(c.min() for v in normed.values() for c in v) < 0
    assert max(c.max() for v in normed.values() for c in v) > 1


def test_run_peak_scores_range():
    runs = {"a": [np.arange(10.0), np.ones(10)], "b": [np.full(10, 20.0)]}
    peaks = run_peak_scores(runs, window=1)
    np.testing.assert_allclose(peaks["a"], [8 / 19, 0.0])
    np.testing.assert_allclose(peaks["b"], [1.0])


TAUS = np.linspace(0, 1, 11)


def test_profile_step_function():
    p = performance_profile({"e": [1.0, 1.0, 1.0]}, TAUS)
    np.testing.assert_array_equal(p.fraction, np.where(TAUS < 1, 1.0, 0.0))


def test_profile_single_run_collapses():
    p = performance_profile({"e": [0.42]}, TAUS)
    np.testing.assert_array_equal(p.lower, p.fraction)
    np.testing.assert_array_equal(p.upper, p.fraction)


def test_profile_two_env_enumeration():
    a, b = [0.1, 0.6, 0.9], [0.3, 0.7]
    taus = np.array([0.0, 0.2, 0.5, 0.65, 0.8, 0.95])
    p = performance_profile({"x": a, "y": b}, taus, n_boot=4000, seed=3)
    expected = [sum(s > t for s in a + b) / 5 for t in taus]
    np.testing.assert_allclose(p.fraction, expected)
    # exhaustive bootstrap distribution: every resample of each stratum
    fracs = []
    for ra in itertools.product(a, repeat=3):
        for rb in itertools.product(b, repeat=2):
            fracs.append([sum(s > t for s in ra + rb) / 5 for t in taus])
    fracs = np.array(fracs)
    assert np.all(p.lower >= fracs.min(axis=0)) and np.all(p.upper <= fracs.max(axis=0))
    assert np.all(p.lower <= p.fraction) and np.all(p.fraction <= p.upper)
    np.testing.assert_allclose(p.lower, np.percentile(fracs, 2.5, axis=0), atol=0.2 + 1e-12)


def test_profile_deterministic_given_seed():
    scores = {"x": np.random.default_rng(0).uniform(size=12), "y": [0.2, 0.5]}
    a, b = performance_profile(scores, TAUS, seed=7), performance_profile(scores, TAUS, seed=7)
    np.testing.assert_array_equal(a.lower, b.lower)
    np.testing.assert_array_equal(a.upper, b.upper)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 2), min_size=1, max_size=15), st.lists(st.floats(-1, 2), max_size=6))
def test_profile_non_increasing(a, b):
    p = performance_profile({"a": a, "b": b}, TAUS, n_boot=200)
    assert np.all(np.diff(p.fraction) <= 0)
    assert np.all(np.diff(p.lower) <= 1e-12) and np.all(np.diff(p.upper) <= 1e-12)


def test_t_interval_two_samples():
    lo, hi = t_interval([1.0, 3.0])
    # mean 2, sd sqrt(2); with one degree of freedom t is Cauchy, quantile tan(pi * (q - 1/2))
    half = math.tan(math.pi * 0.475) * math.sqrt(2) / math.sqrt(2)
    assert (lo, hi) == pytest.approx((2 - half, 2 + half), rel=1e-9)


def test_summarize_constant():
    row = summarize([np.full(50, 7.0), np.full(50, 7.0)])
    assert row.max_score == 7.0 and row.rel_spread == 0.0


def test_summarize_two_runs_known_ci():
    a, b = np.full(10, 100.0), np.full(10, 300.0)
    row = summarize([a, b])
    assert row.max_score == 200.0
    assert row.rel_spread == pytest.approx(2 * math.tan(math.pi * 0.475) * 100 / 200 * 100, rel=1e-9)


def test_summary_table_self_comparison():
    runs = [np.random.default_rng(s).normal(size=300).cumsum() for s in range(3)]
    cmp = summary_table(runs, runs)
    assert (cmp.score_x, cmp.spread_x, cmp.iter_x) == (1.0, 1.0, 1.0)


def test_summary_table_rel_iter_is_first_match():
    base = [np.linspace(0, 100, 500)]
    cand = [np.linspace(0, 200, 500)]
    cmp = summary_table(base, cand, window=1)
    assert cmp.baseline.rel_iter == 499
    assert cmp.candidate.rel_iter == 250  # 200 * i / 499 >= 100 first at i = 250
    assert cmp.iter_x == pytest.approx(250 / 499)


def test_summary_table_inverts_on_swap():
    rng = np.random.default_rng(4)
    a = [rng.normal(100, 10, 300) for _ in range(4)]
    b = [rng.normal(150, 30, 300) for _ in range(4)]
    ab, ba = summary_table(a, b), summary_table(b, a)
    assert ab.score_x * ba.score_x == pytest.approx(1.0, rel=1e-12)
    assert ab.spread_x * ba.spread_x == pytest.approx(1.0, rel=1e-12)


def test_negative_score_ratio_inverted():
    assert score_ratio(-98.5, -154.0) == pytest.approx(154.0 / 98.5)
    assert score_ratio(200.0, 100.0) == 2.0


def test_summary_table_needs_runs():
    with pytest.raises(ValueError):
        summary_table([], [np.ones(3)])


def test_mean_curve_band():
    mean, lo, hi = mean_curve([np.ones(5), np.ones(5) * 3], window=1)
    np.testing.assert_array_equal(mean, np.full(5, 2.0))
    assert np.all(lo < mean) and np.all(hi > mean)
