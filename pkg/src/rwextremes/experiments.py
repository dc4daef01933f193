"""Registry of the verification experiments shared by ``verify`` and the acceptance tests.

Every experiment declares its tolerances up front and returns an
:class:`ExperimentReport`.  All stochastic experiments use ``BASE_SEED``
unless a seed is passed explicitly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import feller, ssrw, stats, valley
from .walk import Gaussian, WalkPath, make_rng, parse_spec, sample_increments

BASE_SEED = 12345


@dataclass(frozen=True)
class Experiment:
    number: int
    name: str
    title: str
    budget_s: float
    run: Callable[..., stats.ExperimentReport]


def _finish(rep: stats.ExperimentReport, t0: float, budget: float) -> stats.ExperimentReport:
    rep.wall_clock = time.time() - t0
    rep.check("runtime_s", rep.wall_clock, None, budget, "runtime", "declared runtime budget")
    return rep


def wendel(n: int = 12, seed: int | None = None) -> stats.ExperimentReport:
    """Law of M_{k,n} equals max_k + independent min_{n-k}, exactly, for every 0 <= k <= n' <= n."""
    t0 = time.time()
    rep = stats.ExperimentReport("wendel", {"n": n}, None)
    mismatches = []
    for m in range(n + 1):
        for k in range(m + 1):
            if ssrw.enumerate_walks(m, f"order:{k}") != ssrw.wendel_convolution(k, m):
                mismatches.append((k, m))
    rep.statistics["pairs_checked"] = (n + 1) * (n + 2) // 2
    rep.statistics["mismatches"] = mismatches
    rep.check("exact_equality", len(mismatches), 0, 0, "exact", "exhaustive enumeration of all paths")
    return _finish(rep, t0, 30.0)


def gap_expectation(n: int = 12, seed: int | None = None) -> stats.ExperimentReport:
    """E D_{k,n} = E S_k^+/k + E S_{n-k+1}^-/(n-k+1) and E S_k^+/k = u_{floor(k/2)}/2, with palindromic symmetry."""
    t0 = time.time()
    rep = stats.ExperimentReport("gap_expectation", {"n": n}, None)
    bad_split, bad_closed, bad_pal = [], [], []
    pos = {k: ssrw.expected_positive_part_ratio(k) for k in range(1, n + 1)}
    neg = {k: ssrw.expected_negative_part_ratio(k) for k in range(1, n + 1)}
    for k in range(1, n + 1):
        if pos[k] != ssrw.expected_gap_limit(k):
            bad_closed.append(k)
    for m in range(1, n + 1):
        means = {k: ssrw.enumerate_walks(m, f"gap:{k}").mean() for k in range(1, m + 1)}
        for k in range(1, m + 1):
            if means[k] != pos[k] + neg[m - k + 1]:
                bad_split.append((k, m))
            if means[m - k + 1] != means[k]:
                bad_pal.append((k, m))
    rep.statistics.update({"split_failures": bad_split, "closed_form_failures": bad_closed,
                           "palindrome_failures": bad_pal})
    rep.check("split_identity", len(bad_split), 0, 0, "exact", "enumeration of gap laws")
    rep.check("central_term_identity", len(bad_closed), 0, 0, "exact", "enumeration of S_k")
    rep.check("palindromic_symmetry", len(bad_pal), 0, 0, "exact", "enumeration of gap laws")
    return _finish(rep, t0, 30.0)


def _round_trip(path: WalkPath) -> tuple[bool, bool]:
    pair = feller.decompose(path)
    a = feller.recover_reverse_induction(pair).same_as(path)
    asc, desc = feller.pair_segments(pair)
    b = feller.riffle_reconstruct(asc, desc).same_as(path)
    return a, b


def round_trip(n: int = 12, gaussian_paths: int = 10_000, gaussian_n: int = 200,
               seed: int | None = None) -> stats.ExperimentReport:
    """Both recovery algorithms reproduce every input path bit for bit."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("round_trip", {"n": n, "gaussian_paths": gaussian_paths,
                                                "gaussian_n": gaussian_n}, seed)
    fails = {"ssrw_reverse": 0, "ssrw_riffle": 0, "gaussian_reverse": 0, "gaussian_riffle": 0}
    count = 0
    for m in range(1, n + 1):
        for s in ssrw._blocks(m):
            for row in s:
                a, b = _round_trip(WalkPath.from_sums(row.astype(np.int64)))
                fails["ssrw_reverse"] += not a
                fails["ssrw_riffle"] += not b
                count += 1
    x = sample_increments(Gaussian(), gaussian_paths, gaussian_n, make_rng(seed))
    for row in x:
        a, b = _round_trip(WalkPath.from_increments(row))
        fails["gaussian_reverse"] += not a
        fails["gaussian_riffle"] += not b
    rep.statistics["ssrw_paths"] = count
    for key, v in fails.items():
        rep.check(key, v, 0, 0, "exact", "bitwise comparison with the input path")
    return _finish(rep, t0, 60.0)


def fbid(n: int = 10, seed: int | None = None) -> stats.ExperimentReport:
    """Joint law of (post-minimum path, reversed pre-minimum path) equals that of (up chain, negated down chain)."""
    t0 = time.time()
    rep = stats.ExperimentReport("fbid", {"n": n}, None)
    bad = [m for m in range(n + 1)
           if ssrw.enumerate_walks(m, "split_pair") != ssrw.enumerate_walks(m, "feller_pair")]
    rep.statistics["failing_n"] = bad
    rep.check("exact_joint_pmf_equality", len(bad), 0, 0, "exact", "exhaustive enumeration")
    return _finish(rep, t0, 60.0)


def geomhits(reps: int = 100_000, horizon: int = 1000, seed: int | None = None) -> stats.ExperimentReport:
    """L_0 is Geo1(1/2); (L_0, L_1) from the branching representation matches the walk decomposition."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("geomhits", {"reps": reps, "horizon": horizon}, seed)
    lu, ld = ssrw.walk_occupations(1, reps, horizon, seed)
    l0 = lu[:, 0] + ld[:, 0]
    l1 = lu[:, 1] + ld[:, 1]
    kmax = int(l0.max())
    counts = np.bincount(l0, minlength=kmax + 1)[1:]
    probs = 0.5 ** np.arange(1, kmax + 1)
    probs[-1] += 0.5 ** kmax  # last cell absorbs the tail
    chi2, p, dof = stats.chisq_gof(counts, probs)
    rep.statistics.update({"chi2": chi2, "dof": dof})
    rep.check("L0_geometric_pvalue", p, None, 0.01, "pvalue", "chi-square against 2^-k")
    z = ssrw.double_immigration(1, reps, make_rng(seed, 1))
    lb = ssrw.occupations_from_branching(z)
    tv = stats.tv_distance(stats.EmpiricalDist.from_samples(lb[:, :2]),
                           stats.EmpiricalDist.from_samples(np.stack([l0, l1], axis=1)))
    rep.statistics["mean_L_branching"] = lb.mean(axis=0).tolist()
    rep.statistics["mean_L_walks"] = [float(l0.mean()), float(l1.mean())]
    rep.check("L0_L1_tv", tv, None, 0.015, "upper", "branching vs Feller-chain decomposition of walks")
    return _finish(rep, t0, 120.0)


def eta_gf(reps: int = 1_000_000, chi_reps: int = 100_000, seed: int | None = None) -> stats.ExperimentReport:
    """E z^{eta_k} against the Chebyshev closed form, and the three passage variables pairwise equal in law."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("eta_gf", {"reps": reps, "chi_reps": chi_reps}, seed)
    lu, ld = ssrw.chain_occupations(3, reps, seed)
    for k in (1, 2, 3):
        eta = ssrw.eta_from_occupations(lu, ld, k)
        for z in (0.5, 0.7):
            est = stats.mc_mean(z ** eta.astype(float))
            key = f"E_z^eta_k{k}_z{z}"
            rep.estimate(key, est.mean, est.se)
            rep.check(key, est.mean, float(ssrw.eta_gf(k, z)), 3.0, "se", "1/(V_k(1/z) V_{k+1}(1/z))")
    for k in (1, 2, 3):
        a = ssrw.sample_n0plus_passage(k, chi_reps, seed + 10 * k + 1)
        b = ssrw.sample_reflected_passage(k, chi_reps, seed + 10 * k + 2)
        c = ssrw.sample_eta_up(k, chi_reps, seed + 10 * k + 3)
        for label, (x, y) in {"n0plus_vs_reflected": (a, b), "n0plus_vs_eta_up": (a, c),
                              "reflected_vs_eta_up": (b, c)}.items():
            _, p, _ = stats.chisq_two_sample(x, y)
            rep.check(f"{label}_k{k}", p, None, 0.01, "pvalue", "two-sample chi-square")
    return _finish(rep, t0, 300.0)


def gap_one(n: int = 10_000, reps: int = 100_000, seed: int | None = None) -> stats.ExperimentReport:
    """P(D_{1,n} = 1) for the simple walk against its limit 1/2."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("gap_one", {"n": n, "reps": reps}, seed)
    ind = ssrw.prob_min_unique(n, reps, seed)
    est = stats.mc_mean(ind.astype(float))
    rep.estimate("P_D1_eq_1", est.mean, est.se)
    exact = ssrw.exact_gap_one(n)
    rep.statistics["exact_finite_n"] = float(exact)
    rep.statistics["exact_minus_limit_in_se"] = float((exact - Fraction(1, 2))) / est.se
    rep.check("P_D1_eq_1", est.mean, 0.5, 3.0, "se", "limit value 1/2")
    return _finish(rep, t0, 300.0)


def _log_grid(lo: float, hi: float, m: int) -> list[float]:
    return [float(v) for v in np.geomspace(lo, hi, m)]


def valley_numerics(reps: int = 1_000_000, grid_points: int = 6, seed: int | None = None
                    ) -> stats.ExperimentReport:
    """Closed-form H^a against 2-D quadrature, the product-formula mean and the Monte Carlo mean against -zeta(1/2)/sqrt(2 pi)."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("valley_numerics", {"reps": reps, "grid_points": grid_points}, seed)
    disc = valley.ha_discrepancy_report(_log_grid(0.05, 5.0, grid_points), _log_grid(0.05, 50.0, grid_points))
    rep.statistics["ha_max_abs_error"] = disc["max_abs_error"]
    rep.statistics["t_term_extra_weight"] = disc["t_term_extra_weight"]
    rep.statistics["elementary_integrals_max_error"] = disc["elementary_integrals_max_error"]
    rep.check("ha_closed_form_vs_quadrature", disc["max_abs_error"]["corrected"], 0.0, 1e-8, "abs",
              "adaptive 2-D quadrature of the defining double integral")
    target = valley.zeta_mean_target()
    rep.statistics["zeta_target"] = target
    mean, err = valley.valley_mean()
    rep.estimate("valley_mean_product_formula", mean, err)
    rep.check("valley_mean_product_formula", mean, target, 1e-3, "abs", "-zeta(1/2)/sqrt(2 pi)")
    sample = valley.mc_valley_order_stats(0, 10**7, reps, seed)
    est = stats.mc_mean(sample.m0)
    rep.estimate("valley_mean_mc", est.mean, est.se)
    rep.statistics["mc_truncated"] = int(sample.truncated.sum())
    rep.check("valley_mean_mc", est.mean, target, 3.0, "se", "-zeta(1/2)/sqrt(2 pi)")
    return _finish(rep, t0, 600.0)


def asymptotics(k: int = 400, reps: int = 100_000, seed: int | None = None) -> stats.ExperimentReport:
    """E D_k sqrt(k) and E W_k / sqrt(k) for the standard Gaussian walk, drawn from the exact limit law."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("asymptotics", {"k": k, "reps": reps}, seed)
    sample = valley.mc_valley_order_stats(k, 10**7, reps, seed)
    d = stats.mc_mean(sample.gaps()[:, k - 1] * math.sqrt(k))
    w = stats.mc_mean(sample.shifted()[:, k] / math.sqrt(k))
    rep.estimate("E_D_k_sqrt_k", d.mean, d.se)
    rep.estimate("E_W_k_over_sqrt_k", w.mean, w.se)
    rep.statistics["truncated"] = int(sample.truncated.sum())
    rep.check("E_D_k_sqrt_k", d.mean, 1 / math.sqrt(2 * math.pi), 0.05, "rel", "sigma/sqrt(2 pi)")
    rep.check("E_W_k_over_sqrt_k", w.mean, math.sqrt(2 / math.pi), 0.05, "rel", "sigma sqrt(2/pi)")
    rep.notes.append("limit law of the Gaussian-walk order statistics sampled as Brownian-valley values on a shifted unit grid")
    return _finish(rep, t0, 600.0)


RATE_GRID = (100, 316, 1000, 3162, 10000)


def rate(reps: int = 5000, seed: int | None = None) -> stats.ExperimentReport:
    """Log-log slope of the binned TV(1, n) is negative with a 95% CI excluding 0."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("rate", {"reps": reps, "n_grid": list(RATE_GRID)}, seed)
    fit = stats.rate_fit(1, RATE_GRID, reps, seed)
    rep.statistics["fit"] = fit.to_dict()
    rep.estimate("slope", fit.slope)
    rep.check("slope_negative", fit.slope, None, 0.0, "upper", "empirical decay")
    rep.check("slope_ci_upper", fit.slope_ci[1], None, 0.0, "upper", "bootstrap 95% CI excludes 0")
    rep.notes.extend(fit.notes)
    return _finish(rep, t0, 900.0)


def exchangeable(reps: int = 100_000, seed: int | None = None) -> stats.ExperimentReport:
    """Mixture checks: drifting N(-1,1)/N(1,1) and centered N(0,1)/N(0,4)."""
    seed = BASE_SEED if seed is None else seed
    t0 = time.time()
    rep = stats.ExperimentReport("exchangeable", {"reps": reps}, seed)
    drift = parse_spec("mixture:0.5*gaussian:1:-1;0.5*gaussian:1:1")
    centered = parse_spec("mixture:0.5*gaussian:1;0.5*gaussian:2")
    for label, sub in (("drift", stats.mixture_gap_checks(drift, 4, 200, reps, seed)),
                       ("centered", stats.mixture_gap_checks(centered, 400, 400, reps, seed))):
        for key, val in sub.estimates.items():
            rep.estimates[f"{label}:{key}"] = val
        rep.statistics[label] = sub.statistics
        for c in sub.checks:
            c.name = f"{label}:{c.name}"
            rep.checks.append(c)
    return _finish(rep, t0, 600.0)


REGISTRY: dict[str, Experiment] = {e.name: e for e in (
    Experiment(1, "wendel", "Wendel identity, exact", 30, wendel),
    Experiment(2, "gap_expectation", "gap expectation identities, exact", 30, gap_expectation),
    Experiment(3, "round_trip", "round-trip recovery", 60, round_trip),
    Experiment(4, "fbid", "split at the last minimum equals the Feller pair, exact", 60, fbid),
    Experiment(5, "geomhits", "occupation of level 0 and branching representation", 120, geomhits),
    Experiment(6, "eta_gf", "Chebyshev generating function and passage variables", 300, eta_gf),
    Experiment(7, "gap_one", "P(D_1 = 1) for the simple walk", 300, gap_one),
    Experiment(8, "valley_numerics", "Brownian valley numerics", 600, valley_numerics),
    Experiment(9, "asymptotics", "large-k gap asymptotics", 600, asymptotics),
    Experiment(10, "rate", "convergence-rate diagnostic", 900, rate),
    Experiment(11, "exchangeable", "exchangeable increments", 600, exchangeable),
)}


def lookup(name: str) -> Experiment:
    key = name.replace("-", "_")
    if key.isdigit():
        for e in REGISTRY.values():
            if e.number == int(key):
                return e
    if key not in REGISTRY:
        raise KeyError(f"unknown experiment {name!r}; choose from {', '.join(REGISTRY)}")
    return REGISTRY[key]
