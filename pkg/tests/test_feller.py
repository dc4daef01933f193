from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwextremes import feller, ssrw
from rwextremes.stats import EmpiricalDist, coupled_order_stats, tv_distance
from rwextremes.walk import Gaussian, Laplace, SimpleSymmetric, WalkPath, make_rng, parse_spec, sample_increments

int_steps = st.lists(st.sampled_from([-1, 1]), min_size=0, max_size=60)
real_steps = st.lists(st.floats(-3, 3, allow_nan=False, allow_subnormal=False), min_size=0, max_size=60)


def test_decompose_hand_trace():
    pair = feller.decompose(WalkPath.from_increments([1, -1, -1, 1]))
    assert pair.up_increments.tolist() == [1]
    assert pair.down_increments.tolist() == [-1, -1, 1]
    assert (pair.n_plus, pair.n_minus) == (1, 3)
    assert pair.up.tolist() == [0, 1] and pair.down.tolist() == [0, -1, -2, -1]


def test_decompose_edge_cases():
    up_only = feller.decompose(WalkPath.from_increments([1, 1, 1]))
    assert up_only.n_minus == 0 and up_only.up.tolist() == [0, 1, 2, 3]
    empty = feller.decompose(WalkPath.from_increments(np.zeros(0, dtype=np.int64)))
    assert empty.up.tolist() == [0] and empty.down.tolist() == [0]
    assert feller.recover_reverse_induction(empty).n == 0


def test_recover_hand_trace():
    pair = feller.FellerPair.from_chains([0, 1], [0, -1, -2, -1])
    assert feller.recover_reverse_induction(pair).increments.tolist() == [1, -1, -1, 1]


def test_from_chains_validation():
    with pytest.raises(ValueError):
        feller.FellerPair.from_chains([0, -1], [0])
    with pytest.raises(ValueError):
        feller.FellerPair.from_chains([0], [0, 1])
    with pytest.raises(ValueError):
        feller.FellerPair.from_chains([1], [0])


@given(st.lists(st.integers(1, 5), max_size=8), st.lists(st.integers(-5, 0), max_size=8))
def test_every_valid_pair_is_recoverable(up_tail, down_tail):
    pair = feller.FellerPair.from_chains([0] + up_tail, [0] + down_tail)
    p = feller.recover_reverse_induction(pair)
    back = feller.decompose(p)
    assert np.array_equal(back.up, pair.up) and np.array_equal(back.down, pair.down)


@given(real_steps)
def test_feller_pair_invariants(steps):
    p = WalkPath.from_increments(np.array(steps, dtype=float))
    pair = feller.decompose(p)
    assert pair.n_plus + pair.n_minus == p.n
    assert pair.n_plus == int(pair.indicator.sum())
    assert np.all(pair.up[1:] > 0) and np.all(pair.down <= 0)
    np_, nm = np.cumsum(pair.indicator), np.cumsum(1 - pair.indicator)
    for k in range(1, p.n + 1):
        assert np.isclose(p.sums[k], pair.up[np_[k - 1]] + pair.down[nm[k - 1]])


@given(real_steps)
def test_round_trip_both_algorithms_gaussian_like(steps):
    p = WalkPath.from_increments(np.array(steps, dtype=float))
    pair = feller.decompose(p)
    assert feller.recover_reverse_induction(pair).same_as(p)
    asc, desc = feller.pair_segments(pair)
    assert feller.riffle_reconstruct(asc, desc).same_as(p)


def test_round_trip_all_ssrw_paths_length_12():
    for s in ssrw._blocks(12):
        for row in s:
            p = WalkPath.from_sums(row.astype(np.int64))
            pair = feller.decompose(p)
            assert feller.recover_reverse_induction(pair).same_as(p)
            asc, desc = feller.pair_segments(pair)
            assert feller.riffle_reconstruct(asc, desc).same_as(p)


def test_round_trip_laplace_paths():
    for row in sample_increments(Laplace(1.0), 200, 200, make_rng(3)):
        p = WalkPath.from_increments(row)
        asc, desc = feller.pair_segments(feller.decompose(p))
        assert feller.riffle_reconstruct(asc, desc).same_as(p)


def test_chain_segments_hand_traces():
    segs = feller.chain_segments([0, 1, 2])
    assert [s.values.tolist() for s in segs] == [[0, 1], [1, 2]]
    segs = feller.chain_segments([0, 2, 1, 3])
    assert [s.values.tolist() for s in segs] == [[0, 2, 1], [1, 3]]
    segs = feller.chain_segments(list(range(6)))
    assert len(segs) == 5 and all(s.values.size == 2 for s in segs)


@given(int_steps)
def test_segment_finals_are_ordered(steps):
    pair = feller.decompose(WalkPath.from_increments(np.array(steps, dtype=np.int64)))
    asc, desc = feller.pair_segments(pair)
    fa = [s.final for s in asc]
    fd = [s.final for s in desc]
    assert all(b > a for a, b in zip(fa, fa[1:])) and all(f > 0 for f in fa)
    assert all(b < a for a, b in zip(fd, fd[1:])) and all(f <= 0 for f in fd)
    for s in asc:
        assert s.final > s.initial
    for i, s in enumerate(desc):
        assert s.final < s.initial or (i == 0 and s.final == s.initial)
    # concatenated segment increments reproduce each chain
    if asc:
        assert np.array_equal(np.concatenate([s.increments for s in asc]), pair.up_increments)
    if desc:
        assert np.array_equal(np.concatenate([s.increments for s in desc]), pair.down_increments)


def test_riffle_single_ascending_segment():
    seg = feller.chain_segments([0, 1, 2, 3])
    only = feller.ChainSegment(np.array([0, 1, 2, 3]), "ascending", np.array([1, 1, 1]))
    assert feller.riffle_reconstruct([only], []).increments.tolist() == [1, 1, 1]
    assert len(seg) == 3


def test_riffle_tie_puts_ascending_first():
    # S hits +1 and then returns to 0: the ascending segment with final 1 precedes
    # the descending one ending at 0 ... then -1
    p = WalkPath.from_increments([1, -1, -1, 1, 1])
    asc, desc = feller.pair_segments(feller.decompose(p))
    assert feller.riffle_reconstruct(asc, desc).same_as(p)


def test_riffle_rejects_malformed_segments():
    bad = feller.ChainSegment(np.array([0, -1]), "ascending", np.array([-1]))
    with pytest.raises(ValueError):
        feller.riffle_reconstruct([bad], [])


def test_ladder_hand_trace():
    rec = feller.ladder_variables(WalkPath.from_sums([0, -1, 1, 2]))
    assert rec.weak_descending == [(1, -1)]
    assert rec.strict_ascending == [(2, 1), (3, 2)]
    dec = feller.ladder_variables(WalkPath.from_sums([0, -1, -2, -3]))
    assert dec.strict_ascending == []


@given(int_steps)
def test_ladder_invariants_and_first_ascending_height(steps):
    rec = feller.ladder_variables(WalkPath.from_increments(np.array(steps, dtype=np.int64)))
    ha = [h for _, h in rec.strict_ascending]
    hd = [h for _, h in rec.weak_descending]
    assert all(b > a for a, b in zip(ha, ha[1:]))
    assert all(b <= a for a, b in zip(hd, hd[1:]))
    for seq in (rec.strict_ascending, rec.weak_descending):
        ep = [e for e, _ in seq]
        assert all(b > a for a, b in zip(ep, ep[1:]))
    if ha:
        assert ha[0] == 1


def test_fbid_exhaustive_small_n():
    for n in range(0, 9):
        assert ssrw.enumerate_walks(n, "split_pair") == ssrw.enumerate_walks(n, "feller_pair")


def test_limit_order_stats_ssrw_w1_is_fair_coin():
    draws = [feller.limit_order_stats(SimpleSymmetric(), 1, 10**4, seed=s) for s in range(3000)]
    assert all(d.certified and d.rule == "exact-ssrw" for d in draws)
    w = np.array([d.w[0] for d in draws])
    assert set(np.unique(w).tolist()) <= {0.0, 1.0}
    assert abs(w.mean() - 0.5) < 3 * 0.5 / np.sqrt(w.size)


def test_limit_order_stats_gaussian_is_nondecreasing_and_certified():
    r = feller.limit_order_stats(Gaussian(), 5, 10**6, seed=4)
    assert r.w.size == 5 and np.all(np.diff(r.w) >= 0) and r.w[0] >= 0
    assert r.certified and r.horizon_used <= 10**6


def test_limit_order_stats_preconditions():
    with pytest.raises(ValueError):
        feller.limit_order_stats(Gaussian(mu=0.1), 1, 1000)
    with pytest.raises(ValueError):
        feller.limit_order_stats(Gaussian(), 0, 1000)
    with pytest.raises(ValueError):
        feller.limit_order_stats(Gaussian(), 10, 5)


def test_limit_order_stats_uncertified_flag_on_tiny_horizon():
    r = feller.limit_order_stats(Gaussian(), 3, 8, safety=50.0, seed=1)
    assert not r.certified


def test_w1_tail_ssrw():
    # first ascending ladder height of the simple walk is 1; the first weak
    # descending height is -1 iff the first step is down
    first_down = ssrw.enumerate_walks(1, lambda row: int(row[1] <= 0 and row[1] < 0))
    p_down = float(first_down.mass.get(1, 0))
    assert feller.w1_tail(lambda w: 1.0 if w < 1 else 0.0, lambda w: p_down if w < 1 else 0.0, 0.5) == 0.5
    assert feller.w1_tail(lambda w: 0.0, lambda w: 0.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        feller.w1_tail(lambda w: 1.0, lambda w: 1.0, 0.0)


def test_w1_tail_gaussian_matches_ladder_heights():
    reps = 100_000
    up, down = feller.sample_ladder_heights(Gaussian(), reps, seed=21)
    up, down = up[~np.isnan(up)], down[~np.isnan(down)]
    w1 = coupled_order_stats(Gaussian(), 1, [20000], reps, seed=22)[:, 0, 0]
    for w in (0.1, 0.3, 0.6, 1.0, 1.5):
        tu, td = np.mean(up > w), np.mean(down > w)
        pred = feller.w1_tail(lambda _: tu, lambda _: td, w)
        emp = np.mean(w1 > w)
        se = np.sqrt(emp * (1 - emp) / reps + pred * (1 - pred) / reps)
        assert abs(emp - pred) < 3 * se + 1e-3, (w, emp, pred)


def test_gaussian_ladder_height_mean():
    up, down = feller.sample_ladder_heights(Gaussian(), 50_000, seed=31)
    for h in (up, down):
        h = h[~np.isnan(h)]
        assert abs(h.mean() - 1 / np.sqrt(2)) < 3 * h.std() / np.sqrt(h.size) + 2e-3


def test_chains_independent_gaussian():
    x = sample_increments(Gaussian(), 100_000, 400, make_rng(41))
    s = np.cumsum(x, axis=1)
    pos = s > 0
    first_up = np.where(pos.any(axis=1), x[np.arange(x.shape[0]), np.argmax(pos, axis=1)], np.nan)
    first_dn = np.where((~pos).any(axis=1), -x[np.arange(x.shape[0]), np.argmax(~pos, axis=1)], np.nan)
    ok = ~np.isnan(first_up) & ~np.isnan(first_dn)
    a = np.floor(first_up[ok] / 0.5).astype(int)
    b = np.floor(np.clip(first_dn[ok], -3, 3) / 0.5).astype(int)
    joint = EmpiricalDist.from_samples(np.stack([a, b], axis=1))
    shuffled = EmpiricalDist.from_samples(np.stack([a, make_rng(42).permutation(b)], axis=1))
    noise = EmpiricalDist.from_samples(np.stack([make_rng(43).permutation(a), make_rng(44).permutation(b)], axis=1))
    baseline = tv_distance(shuffled, noise)
    assert tv_distance(joint, shuffled) < 3 * baseline


def test_transience_profile_matches_return_probability():
    levels = [2, 5, 10]
    prof = feller.transience_profile(levels, 0.5, 5000, 4000, seed=51)
    exact = np.array([feller.transience_exact(L, 0.5) for L in levels])
    se = np.sqrt(exact * (1 - exact) / 5000)
    # a finite horizon can only miss late returns
    assert np.all(prof <= exact + 3 * se)
    assert prof[0] == 0.0 and abs(prof[1] - exact[1]) < 0.04


def test_pair_to_dict_and_limit_to_dict():
    pair = feller.decompose(WalkPath.from_increments([1, -1, -1, 1]))
    d = pair.to_dict()
    assert d["up"] == [0, 1] and d["indicator"] == [1, 0, 0, 0]
    r = feller.limit_order_stats(parse_spec("ssrw"), 2, 1000, seed=3).to_dict()
    assert r["certified"] and len(r["w"]) == 2
