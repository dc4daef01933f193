"""Distribution comparisons, Monte Carlo summaries, experiment reports and the convergence-rate fit."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from . import _kernels as kern
from .walk import Gaussian, IncrementSpec, Mixture, is_continuous, make_rng, sample_increments, validate_spec

SCHEMA_VERSION = 1


# ---------------------------------------------------------------- empirical laws

@dataclass(frozen=True, eq=False)
class EmpiricalDist:
    """Counts on a lattice of bins.

    Discrete samples keep their exact values (``step`` is the lattice step);
    continuous samples are binned with width ``bin_width`` and keyed by bin
    index.  Multivariate samples are keyed by tuples.
    """

    counts: dict
    n: int
    continuous: bool
    bin_width: float | None = None
    step: float | None = None
    samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("an empirical law needs at least one sample")
        if sum(self.counts.values()) != self.n:
            raise ValueError("counts must sum to n")

    @classmethod
    def from_samples(cls, samples, bin_width: float | None = None, step: float | None = None,
                     keep_samples: bool = False) -> "EmpiricalDist":
        x = np.asarray(samples)
        if x.shape[0] < 1:
            raise ValueError("no samples")
        continuous = bin_width is not None
        if continuous:
            if bin_width <= 0:
                raise ValueError("bin_width must be positive")
            keys = np.floor(x / bin_width).astype(np.int64)
        else:
            if x.dtype.kind == "f" and not np.all(x == np.round(x)) and step is None:
                raise ValueError("non-integer samples need a bin_width or a lattice step")
            keys = np.round(x / step).astype(np.int64) if step else x.astype(np.int64)
        if keys.ndim == 1:
            vals, cnt = np.unique(keys, return_counts=True)
            counts = {int(v): int(c) for v, c in zip(vals, cnt)}
        else:
            vals, cnt = np.unique(keys.reshape(keys.shape[0], -1), axis=0, return_counts=True)
            counts = {tuple(int(t) for t in v): int(c) for v, c in zip(vals, cnt)}
        return cls(counts, int(x.shape[0]), continuous, bin_width, step, x if keep_samples else None)

    def pmf(self) -> dict:
        return {k: c / self.n for k, c in self.counts.items()}

    def mean(self) -> float:
        if self.samples is not None:
            return float(np.mean(self.samples))
        scale = self.bin_width or self.step or 1.0
        off = 0.5 if self.continuous else 0.0
        return float(sum((k + off) * c for k, c in self.counts.items()) * scale / self.n)


def _as_pmf(p) -> tuple[dict, tuple]:
    """Normalize an input law to (pmf dict, support descriptor)."""
    if isinstance(p, EmpiricalDist):
        return p.pmf(), ("binned", p.bin_width) if p.continuous else ("lattice", p.step)
    if hasattr(p, "mass"):
        return dict(p.mass), ("exact", None)
    if isinstance(p, Mapping):
        return dict(p), ("exact", None)
    raise TypeError(f"cannot interpret {type(p).__name__} as a law; bin continuous samples first")


def tv_distance(p, q) -> float:
    """Half the L1 distance between two laws on a common support lattice."""
    pp, sp = _as_pmf(p)
    qq, sq = _as_pmf(q)
    if sp[0] == "binned" or sq[0] == "binned":
        if sp != sq:
            raise ValueError(f"incompatible supports: {sp} vs {sq}")
    elif "lattice" in (sp[0], sq[0]) and sp[1] != sq[1] and None not in (sp[1], sq[1]):
        raise ValueError(f"incompatible lattice steps: {sp[1]} vs {sq[1]}")
    total = 0
    for key in set(pp) | set(qq):
        total += abs(pp.get(key, 0) - qq.get(key, 0))
    if isinstance(total, Fraction):
        return float(total / 2)
    return float(min(1.0, max(0.0, total / 2)))


def ks_test(samples_a, samples_b_or_cdf) -> tuple[float, float]:
    """(statistic, p-value): two-sample if given samples, one-sample if given a CDF callable."""
    a = np.asarray(samples_a, dtype=float)
    if a.size < 2:
        raise ValueError("need at least two samples")
    if callable(samples_b_or_cdf):
        res = sps.kstest(a, samples_b_or_cdf)
    else:
        b = np.asarray(samples_b_or_cdf, dtype=float)
        if b.size < 2:
            raise ValueError("need at least two samples")
        res = sps.ks_2samp(a, b)
    return float(res.statistic), float(res.pvalue)


def ks_statistic(samples_a, samples_b_or_cdf) -> float:
    """Sup-norm distance between empirical CDFs (or an empirical CDF and a model CDF)."""
    return ks_test(samples_a, samples_b_or_cdf)[0]


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    se: float
    ci: tuple
    reps: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - target) <= n_se * self.se

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "ci": list(self.ci), "reps": self.reps}


def mc_mean(runs, reps: int | None = None, seed: int | None = None, level: float = 0.95) -> MeanEstimate:
    """Sample mean with CLT standard error and normal confidence interval.

    ``runs`` is either an array of per-replica values or a callable taking a
    generator; in the latter case it is called with ``make_rng(seed, r)`` for
    r = 0..reps-1.
    """
    if callable(runs):
        if reps is None or seed is None:
            raise ValueError("a callable estimator needs reps and seed")
        vals = np.array([runs(make_rng(seed, r)) for r in range(reps)], dtype=float)
    else:
        vals = np.asarray(runs, dtype=float).ravel()
    if vals.size < 2:
        raise ValueError("need at least two replicas")
    m = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    z = float(sps.norm.ppf(0.5 + level / 2))
    return MeanEstimate(m, se, (m - z * se, m + z * se), int(vals.size))


def chisq_gof(observed_counts: Sequence, expected_probs: Sequence, min_expected: float = 5.0
              ) -> tuple[float, float, int]:
    """One-sample chi-square with the sparse tail pooled; returns (statistic, p-value, dof).

    The last cell is taken to absorb the remaining probability mass.
    """
    obs = np.asarray(observed_counts, dtype=float)
    p = np.asarray(expected_probs, dtype=float)
    if obs.shape != p.shape:
        raise ValueError("counts and probabilities must align")
    n = obs.sum()
    exp = n * p
    # pool from the right until every cell has enough expected mass
    o_cells, e_cells = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs[::-1], exp[::-1]):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            o_cells.append(acc_o)
            e_cells.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and e_cells:
        o_cells[-1] += acc_o
        e_cells[-1] += acc_e
    o_cells = np.array(o_cells[::-1])
    e_cells = np.array(e_cells[::-1])
    e_cells *= o_cells.sum() / e_cells.sum()
    res = sps.chisquare(o_cells, e_cells)
    return float(res.statistic), float(res.pvalue), int(o_cells.size - 1)


def chisq_two_sample(a: Sequence, b: Sequence, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Two-sample chi-square homogeneity test on integer samples with sparse values pooled."""
    a = np.asarray(a).astype(np.int64)
    b = np.asarray(b).astype(np.int64)
    vals = np.union1d(a, b)
    ca = np.array([np.count_nonzero(a == v) for v in vals]) if vals.size < 64 else \
        np.bincount(np.searchsorted(vals, a), minlength=vals.size)
    cb = np.array([np.count_nonzero(b == v) for v in vals]) if vals.size < 64 else \
        np.bincount(np.searchsorted(vals, b), minlength=vals.size)
    tot = ca + cb
    frac_a = a.size / (a.size + b.size)
    cells_a, cells_b = [], []
    acc_a = acc_b = 0
    for x, y, t in zip(ca, cb, tot):
        acc_a += x
        acc_b += y
        if min(frac_a, 1 - frac_a) * (acc_a + acc_b) >= min_expected:
            cells_a.append(acc_a)
            cells_b.append(acc_b)
            acc_a = acc_b = 0
    if acc_a + acc_b:
        if cells_a:
            cells_a[-1] += acc_a
            cells_b[-1] += acc_b
        else:
            cells_a.append(acc_a)
            cells_b.append(acc_b)
    if len(cells_a) < 2:
        return 0.0, 1.0, 0
    stat, p, dof, _ = sps.chi2_contingency(np.array([cells_a, cells_b]), correction=False)
    return float(stat), float(p), int(dof)


# ---------------------------------------------------------------- reports

@dataclass
class Check:
    """One pass/fail comparison with its tolerance fixed before the run."""

    name: str
    value: float
    target: float | None
    tolerance: float
    kind: str
    provenance: str
    passed: bool = False

    def to_dict(self) -> dict:
        if self.kind == "runtime":
            return {"name": self.name, "tolerance": self.tolerance, "kind": self.kind,
                    "provenance": self.provenance, "passed": self.passed}
        return {"name": self.name, "value": _jsonable(self.value), "target": _jsonable(self.target),
                "tolerance": self.tolerance, "kind": self.kind, "provenance": self.provenance,
                "passed": self.passed}


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class ExperimentReport:
    name: str
    settings: dict
    seed: int | None
    estimates: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    wall_clock: float = 0.0

    def estimate(self, key: str, value, se: float | None = None) -> None:
        self.estimates[key] = {"value": _jsonable(value), "se": se}

    def check(self, name: str, value, target, tolerance: float, kind: str, provenance: str) -> Check:
        """Record a comparison.

        ``kind`` is one of: abs, rel, se, exact, pvalue, upper, lower, true,
        runtime.  Runtime checks keep their measured value out of the
        deterministic part of the serialized report.
        """
        if kind == "abs":
            ok = abs(value - target) <= tolerance
        elif kind == "rel":
            ok = abs(value - target) <= tolerance * abs(target)
        elif kind == "se":
            se = self.estimates.get(name, {}).get("se")
            if se is None:
                raise ValueError(f"no standard error recorded for {name}")
            ok = abs(value - target) <= tolerance * se
        elif kind == "exact":
            ok = value == target
        elif kind == "pvalue":
            ok = value > tolerance
        elif kind in ("upper", "runtime"):
            ok = value < tolerance
        elif kind == "lower":
            ok = value > tolerance
        elif kind == "true":
            ok = bool(value)
        else:
            raise ValueError(f"unknown check kind {kind!r}")
        c = Check(name, value, target, tolerance, kind, provenance, bool(ok))
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self, timing: bool = True) -> dict:
        """JSON-ready dict; everything except the ``timing`` block is reproducible from (name, settings, seed)."""
        out = {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "settings": {k: _jsonable(v) for k, v in self.settings.items()},
            "seed": self.seed,
            "estimates": self.estimates,
            "statistics": {k: _jsonable(v) for k, v in self.statistics.items()},
            "checks": [c.to_dict() for c in self.checks],
            "notes": self.notes,
            "passed": self.passed,
        }
        if timing:
            out["timing"] = {"wall_clock_s": round(self.wall_clock, 3),
                             "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
        return out


# ---------------------------------------------------------------- convergence rate

@dataclass(frozen=True)
class RateFit:
    n_grid: tuple
    tv: tuple
    tv_ci: tuple
    slope: float
    intercept: float
    slope_ci: tuple
    included: tuple
    notes: tuple = ()
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.n_grid)
        if g.size < 4 or np.any(np.diff(g) <= 0):
            raise ValueError("n_grid must be strictly increasing with at least 4 points")

    def to_dict(self) -> dict:
        return {"n_grid": list(self.n_grid), "tv": list(self.tv), "tv_ci": [list(c) for c in self.tv_ci],
                "slope": self.slope, "intercept": self.intercept, "slope_ci": list(self.slope_ci),
                "included": list(self.included), "notes": list(self.notes), "settings": self.settings}


def coupled_order_stats(spec: IncrementSpec, K: int, checkpoints: Sequence[int], reps: int, seed: int,
                        block: int = 2000, chunk: int = 5000) -> np.ndarray:
    """Joint samples of (W_{1,n}, ..., W_{K,n}) at every checkpoint n, all from the same chain pair.

    By the splitting identity at the last minimum, W_{k,n} is the k-th
    smallest of the first n chain values, one value per step: the upward
    chain value when the walk lands above 0, else minus the downward value.
    Returns shape (reps, len(checkpoints), K).
    """
    validate_spec(spec)
    ck = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if ck.size == 0 or ck[0] < K:
        raise ValueError("checkpoints must be at least K")
    out = np.empty((reps, ck.size, K))
    for c, start in enumerate(range(0, reps, chunk)):
        m = min(chunk, reps - start)
        rng = make_rng(seed, c)
        comps = None
        if isinstance(spec, Mixture):
            from .walk import draw_components
            comps = draw_components(spec, m, rng)
        s = np.zeros(m)
        u = np.zeros(m)
        best = np.full((m, K), np.inf)
        rec = np.empty((m, ck.size, K))
        done = 0
        while done < ck[-1]:
            b = int(min(block, ck[-1] - done))
            if isinstance(spec, Gaussian) and spec.mu == 0.0:
                x = rng.standard_normal((m, b), dtype=np.float32).astype(np.float64) * spec.sigma
            elif comps is None:
                x = np.asarray(sample_increments(spec, m, b, rng), dtype=np.float64)
            else:
                x = np.empty((m, b))
                for j, sub in enumerate(spec.specs):
                    rows = np.flatnonzero(comps == j)
                    if rows.size:
                        x[rows] = sample_increments(sub, rows.size, b, rng)
            kern.chain_smallest_block(x, s, u, best, ck, done, rec)
            done += b
        out[start:start + m] = rec
    return out


def _binned_tv_counts(a_keys: np.ndarray, b_keys: np.ndarray, weights: np.ndarray | None = None) -> float:
    """TV between two weighted empirical laws of integer-keyed rows."""
    keys = np.concatenate([a_keys, b_keys])
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    na = a_keys.shape[0]
    w = np.ones(na) if weights is None else weights
    ca = np.bincount(inv[:na], weights=w, minlength=inv.max() + 1)
    cb = np.bincount(inv[na:], weights=w, minlength=inv.max() + 1)
    return 0.5 * float(np.abs(ca - cb).sum() / w.sum())


def rate_fit(K: int, n_grid: Sequence[int], reps: int, seed: int, spec: IncrementSpec | None = None,
             ref_factor: int = 100, bin_width: float | None = None, n_boot: int = 400,
             min_discordant: int = 20, level: float = 0.95) -> RateFit:
    """Fit log TV(K, n) against log n.

    The finite-n law and the reference law (horizon ``ref_factor`` times the
    largest n) are read off the same chain pair at different times, so the
    binned TV is estimated with coupled pairs; the reference stands in for the
    limit law.  Points where fewer than ``min_discordant`` pairs differ sit at
    the Monte Carlo noise floor and are excluded from the fit with a note.
    The slope CI is a percentile bootstrap over replicas.
    """
    spec = Gaussian() if spec is None else validate_spec(spec)
    if not is_continuous(spec):
        raise ValueError("rate_fit needs a continuous increment law")
    if K < 1:
        raise ValueError("K must be at least 1")
    grid = np.asarray(n_grid, dtype=np.int64)
    if grid.size < 4 or np.any(np.diff(grid) <= 0):
        raise ValueError("n_grid must be strictly increasing with at least 4 points")
    sd = spec.sd if not isinstance(spec, Mixture) else float(np.dot(spec.weights, [s.sd for s in spec.specs]))
    bw = bin_width if bin_width is not None else 0.05 * sd * math.sqrt(K)
    ref_n = int(ref_factor * grid[-1])
    w = coupled_order_stats(spec, K, list(grid) + [ref_n], reps, seed)
    keys = np.floor(w / bw).astype(np.int64)
    ref = keys[:, -1, :]
    tv = []
    disc = []
    for j in range(grid.size):
        tv.append(_binned_tv_counts(keys[:, j, :], ref))
        disc.append(int(np.any(keys[:, j, :] != ref, axis=1).sum()))
    tv = np.array(tv)
    included = np.array([d >= min_discordant and t > 0 for d, t in zip(disc, tv)])
    notes = [f"n={int(n)} excluded: only {d} discordant pairs (noise floor)"
             for n, d, ok in zip(grid, disc, included) if not ok]
    rng = make_rng(seed, 0x5EED)
    boot_tv = np.empty((n_boot, grid.size))
    for b in range(n_boot):
        wts = rng.multinomial(reps, np.full(reps, 1.0 / reps)).astype(float)
        for j in range(grid.size):
            boot_tv[b, j] = _binned_tv_counts(keys[:, j, :], ref, wts)
    alpha = (1 - level) / 2
    tv_ci = tuple((float(np.quantile(boot_tv[:, j], alpha)), float(np.quantile(boot_tv[:, j], 1 - alpha)))
                  for j in range(grid.size))
    if included.sum() >= 2:
        x = np.log(grid[included].astype(float))
        slope, intercept = np.polyfit(x, np.log(tv[included]), 1)
        slopes = []
        for b in range(n_boot):
            yb = boot_tv[b, included]
            if np.all(yb > 0):
                slopes.append(np.polyfit(x, np.log(yb), 1)[0])
        slope_ci = (float(np.quantile(slopes, alpha)), float(np.quantile(slopes, 1 - alpha))) if slopes \
            else (float("nan"), float("nan"))
    else:
        slope = intercept = float("nan")
        slope_ci = (float("nan"), float("nan"))
        notes.append("fewer than two points above the noise floor; no fit")
    settings = {"K": K, "reps": reps, "seed": seed, "reference_horizon": ref_n, "bin_width": bw,
                "n_boot": n_boot, "discordant": disc}
    return RateFit(tuple(int(n) for n in grid), tuple(float(t) for t in tv), tv_ci, float(slope),
                   float(intercept), slope_ci, tuple(bool(i) for i in included), tuple(notes), settings)


# ---------------------------------------------------------------- exchangeable increments

def _normal_pos_part(mu: float, sigma: float) -> float:
    """E (N(mu, sigma^2))^+."""
    if sigma == 0:
        return max(mu, 0.0)
    z = mu / sigma
    return float(mu * sps.norm.cdf(z) + sigma * sps.norm.pdf(z))


def _component_pos_part_ratio(sub, m: int) -> float:
    """E S_m^+ / m for one i.i.d. component (exact for Gaussian components)."""
    if isinstance(sub, Gaussian):
        return _normal_pos_part(sub.mu * m, sub.sigma * math.sqrt(m)) / m
    raise ValueError("closed-form positive parts are available for Gaussian components only")


def mixture_expected_gap(spec: Mixture, k: int, n: int) -> float:
    """Exact E D_{k,n} = E S_k^+/k + E S_{n-k+1}^-/(n-k+1) for a mixture of Gaussian components."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    m = n - k + 1
    total = 0.0
    for w, sub in spec.components:
        pos = _component_pos_part_ratio(sub, k)
        neg = pos - sub.mu  # E S^- = E S^+ - E S
        if m != k:
            neg = _component_pos_part_ratio(sub, m) - sub.mu
        total += w * (pos + neg)
    return total


def mixture_limit_gap(spec: Mixture, k: int) -> float:
    """lim_n E D_{k,n} = E S_k^+/k + E[(component mean)^-]."""
    return float(sum(w * (_component_pos_part_ratio(s, k) + max(-s.mean, 0.0)) for w, s in spec.components))


def sample_gaps(spec: IncrementSpec, k: int, n: int, reps: int, seed: int, chunk: int = 20000) -> np.ndarray:
    """MC draws of D_{k,n} = M_{k,n} - M_{k-1,n}."""
    out = np.empty(reps)
    for c, start in enumerate(range(0, reps, chunk)):
        m = min(chunk, reps - start)
        x = sample_increments(spec, m, n, make_rng(seed, c))
        s = np.concatenate([np.zeros((m, 1)), np.cumsum(x, axis=1)], axis=1)
        part = np.partition(s, (k - 1, k), axis=1)
        out[start:start + m] = part[:, k] - part[:, k - 1]
    return out


def mixture_gap_checks(spec: Mixture, k: int, n: int, reps: int, seed: int,
                       limit_k: int | None = None, limit_n: int | None = None) -> ExperimentReport:
    """Compare Monte Carlo gap means of a Gaussian mixture walk with the exchangeable-case formulas.

    With drifting components: E D_{k,n} against E S_k^+/k + E[(mean | component)^-]
    (3 SE), and at ``limit_k`` the large-k value E|mean| (3 SE; the
    finite-k limit formula is reported alongside).  With centered
    components: E D_k sqrt(2 pi k) against E sigma (5%), drawing the limit
    law from the Brownian valley scaled by each replica's sigma (``n`` is
    then unused).
    """
    from .valley import mc_valley_order_stats

    validate_spec(spec)
    if not isinstance(spec, Mixture):
        spec = Mixture(((1.0, spec),))
    if not all(isinstance(s, Gaussian) for s in spec.specs):
        raise ValueError("mixture_gap_checks supports Gaussian components")
    t0 = time.time()
    rep = ExperimentReport("mixture_gap_checks", {"spec": repr(spec), "k": k, "n": n, "reps": reps}, seed)
    centered = all(s.mu == 0 for s in spec.specs)
    if not centered:
        d = sample_gaps(spec, k, n, reps, seed)
        est = mc_mean(d)
        target = mixture_limit_gap(spec, k)
        rep.estimate("E_D_k_n", est.mean, est.se)
        rep.statistics["finite_n_formula"] = mixture_expected_gap(spec, k, n)
        rep.check("E_D_k_n", est.mean, target, 3.0, "se", "limit formula E S_k^+/k + E[(mean|component)^-]")
        lk = limit_k if limit_k is not None else 100
        ln = limit_n if limit_n is not None else 20 * lk
        d2 = sample_gaps(spec, lk, ln, reps, seed + 1)
        est2 = mc_mean(d2)
        rep.estimate("E_D_large_k", est2.mean, est2.se)
        abs_mean = float(sum(w * abs(s.mu) for w, s in spec.components))
        rep.statistics["E_abs_component_mean"] = abs_mean
        rep.statistics["limit_formula_at_large_k"] = mixture_limit_gap(spec, lk)
        rep.check("E_D_large_k", est2.mean, abs_mean, 3.0, "se", "large-k limit E|mean of component|")
        rep.settings.update({"limit_k": lk, "limit_n": ln})
    else:
        sample = mc_valley_order_stats(k, 10**7, reps, seed)
        comp = make_rng(seed, 0xC0).choice(len(spec.components), size=reps, p=spec.weights)
        sig = np.array([s.sigma for s in spec.specs])[comp]
        d = sig * sample.gaps()[:, k - 1]
        scaled = d * math.sqrt(2 * math.pi * k)
        est = mc_mean(scaled)
        target = float(sum(w * s.sigma for w, s in spec.components))
        rep.estimate("E_D_k_sqrt_2pik", est.mean, est.se)
        rep.statistics["truncated"] = int(sample.truncated.sum())
        rep.check("E_D_k_sqrt_2pik", est.mean, target, 0.05, "rel", "E sqrt(var | component)")
        rep.notes.append("limit law drawn from the exact Brownian-valley sampler scaled by the component sigma")
    rep.wall_clock = time.time() - t0
    return rep
