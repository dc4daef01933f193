from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwextremes import stats
from rwextremes.ssrw import ExactPmf
from rwextremes.walk import Gaussian, Mixture, SimpleSymmetric, make_rng, sample_increments

laws = st.dictionaries(st.integers(-5, 5), st.integers(1, 20), min_size=1).map(
    lambda d: {k: Fraction(v, sum(d.values())) for k, v in d.items()})


def test_tv_examples():
    assert stats.tv_distance({0: 0.5, 1: 0.5}, {0: 0.25, 1: 0.75}) == 0.25
    assert stats.tv_distance({0: 1.0}, {1: 1.0}) == 1.0
    assert stats.tv_distance(ExactPmf({0: Fraction(1)}), {0: Fraction(1)}) == 0.0


@given(laws, laws, laws)
def test_tv_is_a_metric(p, q, r):
    d = stats.tv_distance
    assert d(p, p) == 0
    assert d(p, q) == d(q, p)
    assert 0 <= d(p, q) <= 1
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-12


def test_tv_rejects_mismatched_bins():
    a = stats.EmpiricalDist.from_samples(np.linspace(0, 1, 50), bin_width=0.1)
    b = stats.EmpiricalDist.from_samples(np.linspace(0, 1, 50), bin_width=0.2)
    with pytest.raises(ValueError):
        stats.tv_distance(a, b)
    with pytest.raises(TypeError):
        stats.tv_distance(np.arange(3), {0: 1.0})
    with pytest.raises(ValueError):
        stats.EmpiricalDist.from_samples(np.array([0.5, 1.5]))


def test_empirical_dist_mean_and_pmf():
    e = stats.EmpiricalDist.from_samples(np.array([1, 1, 2, 4]))
    assert e.pmf() == {1: 0.5, 2: 0.25, 4: 0.25}
    assert e.mean() == 2.0


def test_ks_uniform_below_critical_value():
    n = 100_000
    x = make_rng(1).random(n)
    assert stats.ks_statistic(x, lambda v: np.clip(v, 0, 1)) < 1.95 / math.sqrt(n)
    with pytest.raises(ValueError):
        stats.ks_test([1.0], [1.0, 2.0])


def test_second_order_statistic_matches_wendel_form():
    # M_{1,n} has the law of max over 1 step plus an independent min over n-1 steps
    reps, n = 20_000, 100
    x = sample_increments(Gaussian(), reps, n, make_rng(2))
    s = np.concatenate([np.zeros((reps, 1)), np.cumsum(x, axis=1)], axis=1)
    m1 = np.partition(s, 1, axis=1)[:, 1]
    y = sample_increments(Gaussian(), reps, n, make_rng(3))
    head = np.maximum(y[:, 0], 0.0)
    tail = np.minimum(0.0, np.cumsum(y[:, 1:], axis=1).min(axis=1))
    _, p = stats.ks_test(m1, head + tail)
    assert p > 0.01


def test_mc_mean_basics():
    est = stats.mc_mean(np.full(10, 3.0))
    assert est.mean == 3.0 and est.se == 0.0 and est.ci == (3.0, 3.0)
    with pytest.raises(ValueError):
        stats.mc_mean(np.array([1.0]))
    with pytest.raises(ValueError):
        stats.mc_mean(lambda rng: rng.random())
    a = stats.mc_mean(lambda rng: rng.random(), reps=200, seed=4)
    b = stats.mc_mean(lambda rng: rng.random(), reps=200, seed=4)
    assert a == b and a.within(0.5)
    assert json.loads(json.dumps(a.to_dict()))["reps"] == 200


def test_gaussian_gap_mean_against_split_formula():
    # E D_{k,n} = (1/sqrt(k) + 1/sqrt(n-k+1)) / sqrt(2 pi) for standard Gaussian steps
    d = stats.sample_gaps(Gaussian(), 9, 200, 50_000, seed=5)
    target = (1 / 3 + 1 / math.sqrt(192)) / math.sqrt(2 * math.pi)
    assert stats.mc_mean(d).within(target)


def test_chisq_gof_and_pooling():
    probs = np.array([0.5, 0.25, 0.125, 0.0625, 0.0625])
    counts = np.array([5000, 2500, 1250, 625, 625])
    _, p, dof = stats.chisq_gof(counts, probs)
    assert p > 0.99 and dof == 4
    _, p, dof = stats.chisq_gof(np.array([90, 9, 1]), np.array([0.9, 0.09, 0.01]))
    assert dof == 1
    _, p, _ = stats.chisq_gof(np.array([10, 90]), np.array([0.5, 0.5]))
    assert p < 1e-10


def test_chisq_two_sample_detects_difference():
    rng = make_rng(6)
    a = rng.geometric(0.5, 20_000)
    b = rng.geometric(0.5, 20_000)
    c = rng.geometric(0.45, 20_000)
    assert stats.chisq_two_sample(a, b)[1] > 0.001
    assert stats.chisq_two_sample(a, c)[1] < 1e-6


def test_report_checks_and_serialization():
    rep = stats.ExperimentReport("demo", {"n": 3}, 7)
    rep.estimate("m", 1.0, 0.1)
    assert rep.check("m", 1.2, 1.0, 3.0, "se", "x").passed
    assert not rep.check("a", 1.2, 1.0, 0.1, "abs", "x").passed
    assert rep.check("r", 1.04, 1.0, 0.05, "rel", "x").passed
    assert rep.check("e", Fraction(1, 3), Fraction(1, 3), 0, "exact", "x").passed
    assert rep.check("t", 12.3, None, 60, "runtime", "x").passed
    with pytest.raises(ValueError):
        rep.check("bad", 1, 1, 1, "fuzzy", "x")
    with pytest.raises(ValueError):
        rep.check("nose", 1, 1, 1, "se", "x")
    assert not rep.passed
    d = rep.to_dict(timing=False)
    assert "timing" not in d and "value" not in d["checks"][4]
    assert d["checks"][3]["value"] == "1/3"
    assert json.dumps(d, sort_keys=True) == json.dumps(rep.to_dict(timing=False), sort_keys=True)
    assert "timing" in rep.to_dict()


def test_empty_report_does_not_pass():
    assert not stats.ExperimentReport("empty", {}, None).passed


def test_rate_fit_preconditions():
    with pytest.raises(ValueError):
        stats.rate_fit(1, [100, 316, 1000, 3162], 100, seed=1, spec=SimpleSymmetric())
    with pytest.raises(ValueError):
        stats.rate_fit(1, [100, 316, 1000], 100, seed=1)
    with pytest.raises(ValueError):
        stats.rate_fit(1, [100, 1000, 316, 3162], 100, seed=1)


def test_rate_fit_small_run_is_reproducible():
    a = stats.rate_fit(1, [50, 100, 200, 400], 600, seed=9, ref_factor=10, n_boot=50)
    b = stats.rate_fit(1, [50, 100, 200, 400], 600, seed=9, ref_factor=10, n_boot=50)
    assert a.to_dict() == b.to_dict()
    assert all(0 <= t <= 1 for t in a.tv)
    assert a.tv[0] >= a.tv[-1]


def test_coupled_order_stats_nondecreasing():
    w = stats.coupled_order_stats(Gaussian(), 3, [10, 100, 1000], 500, seed=10)
    assert w.shape == (500, 3, 3)
    assert np.all(np.diff(w, axis=2) >= 0)
    # more chain values can only push the k smallest down
    assert np.all(np.diff(w, axis=1) <= 0)


def test_mixture_single_component_reduces_to_gaussian():
    spec = Mixture(((1.0, Gaussian()),))
    k, n = 4, 10
    exact = (1 / math.sqrt(k) + 1 / math.sqrt(n - k + 1)) / math.sqrt(2 * math.pi)
    assert abs(stats.mixture_expected_gap(spec, k, n) - exact) < 1e-14
    assert abs(stats.mixture_limit_gap(spec, k) - 1 / math.sqrt(2 * math.pi * k)) < 1e-14


def test_mixture_limit_gap_approaches_mean_absolute_drift():
    spec = Mixture(((0.5, Gaussian(1.0, -1.0)), (0.5, Gaussian(1.0, 1.0))))
    assert abs(stats.mixture_limit_gap(spec, 10_000) - 1.0) < 1e-3
    with pytest.raises(ValueError):
        stats.mixture_expected_gap(spec, 0, 5)


def test_rate_fit_tv_nonincreasing_within_two_se():
    fit = stats.rate_fit(1, [100, 316, 1000, 3162], 4000, seed=12, ref_factor=10, n_boot=200)
    se = [(hi - lo) / 3.92 for lo, hi in fit.tv_ci]
    for j in range(len(fit.tv) - 1):
        assert fit.tv[j + 1] <= fit.tv[j] + 2 * math.hypot(se[j], se[j + 1])
    assert fit.slope < 0
