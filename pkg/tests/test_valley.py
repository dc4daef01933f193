from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from rwextremes import valley
from rwextremes.stats import ks_test

PRODUCT_GAP = "the infinite product treats the grid values as a Markov chain, which undercounts the true valley tail"
A_GRID = np.exp(np.linspace(np.log(0.05), np.log(5.0), 6))
T_GRID = np.exp(np.linspace(np.log(0.05), np.log(50.0), 6))


@pytest.fixture(scope="module")
def valley_mc():
    return valley.mc_valley_order_stats(3, 10**5, 200_000, seed=77)


@pytest.fixture(scope="module")
def product_mean():
    return valley.valley_mean()


@pytest.fixture(scope="module")
def grid_discretization():
    return valley.discretization_experiment(10**4, 1000, 5000, seed=88)


# ---------------------------------------------------------------- special functions

def test_erfc_values():
    assert valley.erfc(0.0) == 1.0
    # 30-digit mpmath oracle
    assert abs(valley.erfc(1.0) - 0.157299207050285130658779364917) < 1e-15


@given(st.floats(-6, 6, allow_nan=False))
def test_erfc_symmetry(x):
    assert abs(valley.erfc(-x) - (2 - valley.erfc(x))) < 1e-14


def test_owen_t_identities():
    assert valley.owen_t(0.7, 0.0) == 0.0
    assert abs(valley.owen_t(0.0, 1.3) - math.atan(1.3) / (2 * math.pi)) < 1e-14
    phi = sps.norm.cdf(0.7)
    assert abs(valley.owen_t(0.7, 1.0) - 0.5 * phi * (1 - phi)) < 1e-14


@given(st.floats(0, 4), st.floats(0, 6))
def test_owen_t_matches_quadrature(h, a):
    assert abs(valley.owen_t(h, a) - valley.owen_t_quad(h, a)) < 1e-10


def test_owen_t_quad_sign_validation():
    with pytest.raises(ValueError):
        valley.owen_t_quad(1.0, 1.0, sign=0)
    # the growing exponent blows up with h
    assert valley.owen_t_quad(6.0, 3.0, +1) > 1e30


def test_k_a_limits_and_value():
    assert abs(valley.k_a(1e-9, 1.0) - 1.0) < 1e-8
    assert valley.k_a(40.0, 1.0) < 1e-300
    assert abs(valley.k_a(1.0, 1.0) - 0.801251956901200802425195294607) < 1e-14


def test_k_a_against_mc():
    hits = valley.mc_k_a(1.0, 1.0, 10**6, seed=3)
    se = hits.std() / math.sqrt(hits.size)
    assert abs(hits.mean() - valley.k_a(1.0, 1.0)) < 3 * se


# ---------------------------------------------------------------- H^a

def test_h_a_bounded_by_one_time_probabilities():
    a, t = np.meshgrid(A_GRID, T_GRID)
    h = valley.h_a(a, t)
    assert np.all(h >= -1e-15)
    assert np.all(h <= np.minimum(valley.k_a(a, t), valley.k_a(a, t + 1)) + 1e-14)


def test_h_a_frozen_value():
    # mpmath nested quadrature of the double integral at 30 digits
    assert abs(valley.h_a(1.0, 2.0) - 0.885327590010004029651721131021) < 1e-8


def test_h_a_matches_2d_quadrature():
    assert abs(valley.h_a(1.0, 2.0) - valley.h_a_quad2(1.0, 2.0)) < 1e-8
    assert abs(valley.h_a(1.0, 2.0) - valley.h_a_quad(1.0, 2.0)) < 1e-10


def test_h_a_against_mc():
    hits = valley.mc_h_a(1.0, 2.0, 10**6, seed=4)
    se = hits.std() / math.sqrt(hits.size)
    assert abs(hits.mean() - valley.h_a(1.0, 2.0)) < 3 * se


def test_h_a_variants():
    ref = valley.h_a_quad2(1.0, 2.0)
    assert abs(valley.h_a(1.0, 2.0, "classical") - ref) > 1e-3
    assert abs(valley.h_a(1.0, 2.0, "printed") - ref) > 1e-3
    with pytest.raises(ValueError):
        valley.h_a(1.0, 2.0, "other")


def test_discrepancy_report_localizes_terms():
    rep = valley.ha_discrepancy_report(a_grid=(0.3, 1.0), t_grid=(0.5, 3.0))
    assert rep["passes"] == {"corrected": True, "classical": False, "printed": False}
    assert rep["max_abs_error"]["corrected"] < 1e-8
    assert len(rep["t_term_labels"]) == 3
    assert np.allclose(rep["t_term_extra_weight"], 1.0, atol=1e-6)
    assert rep["elementary_integrals_max_error"] < 1e-10


# ---------------------------------------------------------------- G^a and the valley law

def test_g_a_monotone_and_bounded():
    ev = valley.ValleyEvaluator()
    for u in (0.2, 0.5, 0.8):
        vals = [ev.g(a, u) for a in np.linspace(0.1, 3.0, 8)]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
        for a, g in zip(np.linspace(0.1, 3.0, 8), vals):
            assert 0 <= g <= valley.k_a(a, u)


def test_g_a_frozen_product_value():
    # regression value of the product formula itself
    assert abs(valley.g_a(1.0, 0.5) - 0.3896913860656723) < 1e-8


@pytest.mark.xfail(strict=True, reason=PRODUCT_GAP)
def test_g_a_matches_grid_mc():
    hits = valley.mc_g_a(1.0, 0.5, 10**6, seed=5)
    se = hits.std() / math.sqrt(hits.size)
    assert abs(hits.mean() - valley.g_a(1.0, 0.5)) < 3 * se


def test_valley_tail_shape():
    assert abs(valley.valley_tail(1e-6) - 1.0) < 1e-4
    a = np.linspace(0.05, 2.5, 12)
    t = [valley.valley_tail(x) for x in a]
    assert all(y <= x + 1e-12 for x, y in zip(t, t[1:]))
    ev = valley.ValleyEvaluator()
    for x in (0.3, 1.0):
        assert abs(ev.tail(x) - ev.tail_unsymmetrized(x)) < 1e-7


@pytest.mark.xfail(strict=True, reason=PRODUCT_GAP)
def test_valley_tail_near_mean_matches_mc(valley_mc):
    m0 = valley_mc.m0
    emp = np.mean(m0 > 0.5826)
    se = math.sqrt(emp * (1 - emp) / m0.size)
    assert abs(emp - valley.valley_tail(0.5826)) < 3 * se


@pytest.mark.xfail(strict=True, reason=PRODUCT_GAP)
def test_valley_tail_at_one_matches_mc(valley_mc):
    m0 = valley_mc.m0
    emp = np.mean(m0 > 1.0)
    se = math.sqrt(emp * (1 - emp) / m0.size)
    assert abs(emp - valley.valley_tail(1.0)) < 3 * se


def test_valley_tail_below_midpoint_envelope():
    for a in (0.1, 0.6, 1.5, 2.5):
        assert valley.valley_tail(a) <= valley.k_a(a, 0.5) ** 2


def test_zeta_half():
    # mpmath reference value
    assert abs(valley.zeta_real(0.5) - (-1.46035450880958681288949915252)) < 1e-12
    assert abs(valley.zeta_real(2.0) - math.pi ** 2 / 6) < 1e-12
    assert abs(valley.zeta_mean_target() - 0.582597157939010670205177164188) < 1e-12


def test_valley_mean_frozen_product_value(product_mean):
    val, err = product_mean
    assert abs(val - 0.5749010739329217) < 1e-7
    assert err < 1e-6


@pytest.mark.xfail(strict=True, reason=PRODUCT_GAP)
def test_valley_mean_matches_zeta_expression(product_mean):
    val, _ = product_mean
    assert abs(val - valley.zeta_mean_target()) < 1e-3


# ---------------------------------------------------------------- samplers

def test_bes3_entrance_law():
    r = valley.sample_bes3_grid([2.0], seed=6, reps=100_000)[:, 0]
    assert np.all(r > 0)
    assert sps.kstest(r / math.sqrt(2.0), sps.chi(3).cdf).pvalue > 1e-3
    sq = r ** 2
    assert abs(sq.mean() - 6.0) < 3 * sq.std() / math.sqrt(sq.size)


def test_bes3_grid_validation():
    with pytest.raises(ValueError):
        valley.sample_bes3_grid([1.0, 0.5], seed=1)


def test_valley_order_stats_structure(valley_mc):
    o = valley_mc.order_stats
    assert o.shape == (200_000, 4)
    assert np.all(np.diff(o, axis=1) >= 0) and np.all(o[:, 0] > 0)
    assert np.all((valley_mc.u >= 0) & (valley_mc.u < 1))
    assert valley_mc.truncated.mean() < 1e-3
    assert np.allclose(valley_mc.shifted()[:, 0], 0.0)


def test_valley_mc_mean(valley_mc):
    m0 = valley_mc.m0
    assert abs(m0.mean() - valley.zeta_mean_target()) < 3 * m0.std() / math.sqrt(m0.size)


# ---------------------------------------------------------------- discretization

def test_discretization_difference_nonnegative(grid_discretization):
    assert np.all(grid_discretization.difference >= 0)


def test_discretization_mean_within_five_percent(grid_discretization):
    target = valley.zeta_mean_target()
    assert abs(grid_discretization.difference.mean() - target) < 0.05 * target


@pytest.mark.xfail(strict=True, reason="a finite fine grid misses the true Brownian minimum, shifting the law by about 0.018")
def test_discretization_grid_ks_against_valley(grid_discretization, valley_mc):
    d, _ = ks_test(grid_discretization.difference, valley_mc.m0)
    assert d < 0.02


def test_discretization_exact_bridge_ks_against_valley(valley_mc):
    res = valley.discretization_experiment(10**4, 1000, 20_000, seed=89, method="exact")
    assert np.all(res.difference >= 0)
    d, _ = ks_test(res.difference, valley_mc.m0)
    assert d < 0.02


def test_discretization_validation():
    with pytest.raises(ValueError):
        valley.discretization_experiment(100, 10, 10, seed=1)
    with pytest.raises(ValueError):
        valley.discretization_experiment(100, 200, 10, seed=1, method="other")
