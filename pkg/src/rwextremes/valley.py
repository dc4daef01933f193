"""Brownian valley: BES(3) special-function formulas, the product law of the minimum, and exact samplers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import _kernels as kern
from .walk import make_rng

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------- special functions

def erfc(x):
    """Complementary error function (scipy's implementation, relative error ~1e-16)."""
    return special.erfc(x)


def owen_t(h, a):
    """Owen's T with the classical exponent: (1/2pi) int_0^a exp(-h^2(1+x^2)/2)/(1+x^2) dx."""
    return special.owens_t(h, a)


def owen_t_quad(h: float, a: float, sign: int = -1) -> float:
    """Owen's integral by adaptive quadrature; ``sign=+1`` uses the growing exponent +h^2(1+x^2)/2."""
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    f = lambda x: math.exp(sign * 0.5 * h * h * (1 + x * x)) / (1 + x * x)
    val, _ = integrate.quad(f, 0.0, a, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val / (2 * math.pi)


def k_a(a, t):
    """P(R_3(t) > a) for a BES(3) process started at 0."""
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.sqrt(2.0 / (np.pi * t)) * a * np.exp(-a * a / (2 * t)) + special.erfc(a / np.sqrt(2 * t))


def _h_a_parts(a, t):
    """Closed form of H^a(t) split into its non-T part and the three Owen-T terms."""
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    st = np.sqrt(t)
    e1 = np.exp(-a * a / (2 * (1 + t)))
    g = np.sqrt(2 * t * (t + 1))
    base = (a / np.sqrt(2 * np.pi * (1 + t)) * e1 * (special.erfc(a / g) + special.erfc(a * (2 * t + 1) / g))
            + (np.exp(-a * a / (2 * t)) - np.exp(-a * a * (4 * t + 1) / (2 * t))) / (np.pi * st)
            + a / np.sqrt(2 * np.pi * t) * np.exp(-a * a / (2 * t)) * (1 + special.erfc(SQRT2 * a))
            + special.erfc(a / np.sqrt(2 * t))
            + special.erfc(a / np.sqrt(2 * (t + 1))))
    h1 = a / np.sqrt(t + 1)
    terms = (special.owens_t(h1, 1 / st), special.owens_t(h1, (2 * t + 1) / st), special.owens_t(a / st, 2 * st))
    return base, terms


T_COEFFICIENT = 2.0


def h_a(a, t, variant: str = "corrected"):
    """P(R_3(t) > a, R_3(t+1) > a) in closed form.

    ``corrected`` weights the three Owen-T terms by 2 (this matches direct
    quadrature); ``classical`` keeps weight 1 with the classical T;
    ``printed`` keeps weight 1 and evaluates T with the growing exponent.
    """
    base, terms = _h_a_parts(a, t)
    if variant == "corrected":
        return base - T_COEFFICIENT * sum(terms)
    if variant == "classical":
        return base - sum(terms)
    if variant == "printed":
        if np.ndim(a) or np.ndim(t):
            raise ValueError("the printed variant is scalar only")
        st = math.sqrt(t)
        h1 = a / math.sqrt(t + 1)
        tp = (owen_t_quad(h1, 1 / st, +1) + owen_t_quad(h1, (2 * t + 1) / st, +1)
              + owen_t_quad(a / st, 2 * st, +1))
        return float(base) - tp
    raise ValueError(f"unknown variant {variant!r}")


def _inner_y(a, x):
    """int_a^inf y [phi-type kernel] dy, the inner integral in closed form."""
    return (np.exp(-0.5 * (a - x) ** 2) - np.exp(-0.5 * (a + x) ** 2)
            + math.sqrt(math.pi / 2) * x * (special.erfc((a - x) / SQRT2) + special.erfc((a + x) / SQRT2)))


def h_a_quad(a: float, t: float, tol: float = 1e-12) -> float:
    """H^a(t) from the entrance law and transition density by 1-D quadrature of the closed inner integral."""
    f = lambda x: x * math.exp(-x * x / (2 * t)) * _inner_y(a, x)
    val, _ = integrate.quad(f, a, np.inf, epsabs=0.0, epsrel=tol, limit=200)
    return val / (math.pi * t ** 1.5)


def h_a_quad2(a: float, t: float, tol: float = 1e-11) -> float:
    """H^a(t) by adaptive 2-D quadrature of the defining double integral."""
    def inner(y, x):
        return x * math.exp(-x * x / (2 * t)) * y * (math.exp(-0.5 * (y - x) ** 2) - math.exp(-0.5 * (y + x) ** 2))

    # the mass sits within ~12 standard deviations of the origin/diagonal
    xmax = a + 12.0 * math.sqrt(t) + 12.0
    val, _ = integrate.dblquad(inner, a, xmax, lambda x: max(a, x - 12.0), lambda x: x + 12.0,
                               epsabs=1e-14, epsrel=tol)
    return val / (math.pi * t ** 1.5)


def _integral_i(a, t):
    f = lambda x: x * math.exp(-0.5 * (a - x) ** 2 - x * x / (2 * t))
    return integrate.quad(f, a, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]


def _integral_ii(a, t):
    f = lambda x: x * math.exp(-0.5 * (a + x) ** 2 - x * x / (2 * t))
    return integrate.quad(f, a, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]


def _closed_i(a, t):
    return (a * math.sqrt(math.pi * t ** 3 / (2 * (t + 1) ** 3)) * math.exp(-a * a / (2 * (t + 1)))
            * special.erfc(a / math.sqrt(2 * t * (t + 1))) + t / (t + 1) * math.exp(-a * a / (2 * t)))


def _closed_ii(a, t):
    return (-a * math.sqrt(math.pi * t ** 3 / (2 * (t + 1) ** 3)) * math.exp(-a * a / (2 * (t + 1)))
            * special.erfc(a * (2 * t + 1) / math.sqrt(2 * t * (t + 1)))
            + t / (t + 1) * math.exp(-a * a * (4 * t + 1) / (2 * t)))


DEFAULT_A_GRID = (0.05, 0.3, 1.0, 2.5, 5.0)
DEFAULT_T_GRID = (0.05, 0.5, 3.0, 50.0)


def ha_discrepancy_report(a_grid=DEFAULT_A_GRID, t_grid=DEFAULT_T_GRID, tol: float = 1e-8,
                          quad: str = "2d") -> dict:
    """Compare closed-form variants of H^a against quadrature and localize any mismatch.

    The residual of the weight-1 formula is regressed on the three Owen-T terms
    individually; a fitted extra weight near 1 on a term means that term needs
    weight 2.  The two elementary integrals of the reduction are checked on
    their own, which isolates the error to the erfc-weighted pieces.
    """
    rows = []
    design = []
    resid = []
    for a in a_grid:
        for t in t_grid:
            ref = h_a_quad2(a, t) if quad == "2d" else h_a_quad(a, t)
            base, terms = _h_a_parts(a, t)
            classical = float(base - sum(terms))
            corrected = float(base - 2 * sum(terms))
            try:
                printed = h_a(a, t, "printed")
            except OverflowError:
                printed = float("inf")
            rows.append({
                "a": a, "t": t, "quadrature": ref,
                "corrected": corrected, "classical": classical, "printed": printed,
                "err_corrected": abs(corrected - ref), "err_classical": abs(classical - ref),
                "err_printed": abs(printed - ref) if np.isfinite(printed) else float("inf"),
                "integral_I_err": abs(_closed_i(a, t) - _integral_i(a, t)),
                "integral_II_err": abs(_closed_ii(a, t) - _integral_ii(a, t)),
            })
            design.append([-float(x) for x in terms])
            resid.append(ref - classical)
    coef, *_ = np.linalg.lstsq(np.array(design), np.array(resid), rcond=None)
    max_err = {k: max(r[f"err_{k}"] for r in rows) for k in ("corrected", "classical", "printed")}
    return {
        "rows": rows,
        "max_abs_error": max_err,
        "tolerance": tol,
        "passes": {k: bool(v < tol) for k, v in max_err.items()},
        "t_term_extra_weight": coef.tolist(),
        "t_term_labels": ["T(a/sqrt(t+1), 1/sqrt(t))", "T(a/sqrt(t+1), (2t+1)/sqrt(t))", "T(a/sqrt(t), 2 sqrt(t))"],
        "elementary_integrals_max_error": max(max(r["integral_I_err"], r["integral_II_err"]) for r in rows),
    }


# ---------------------------------------------------------------- zeta(1/2)

def zeta_real(s: float, n_terms: int = 40) -> float:
    """Riemann zeta for real s != 1 via the alternating eta series with Cohen-Villegas-Zagier acceleration."""
    if s == 1:
        raise ValueError("pole at s = 1")
    d = (3 + math.sqrt(8)) ** n_terms
    d = (d + 1 / d) / 2
    b = -1.0
    c = -d
    acc = 0.0
    for k in range(n_terms):
        c = b - c
        acc += c / (k + 1) ** s
        b = (k + n_terms) * (k - n_terms) * b / ((k + 0.5) * (k + 1))
    eta = acc / d
    return eta / (1 - 2 ** (1 - s))


def zeta_mean_target() -> float:
    """-zeta(1/2)/sqrt(2 pi), the known mean of the valley minimum."""
    return -zeta_real(0.5) / SQRT2PI


# ---------------------------------------------------------------- product formula

@lru_cache(maxsize=256)
def _tail_series(a: float, order: int = 40) -> np.ndarray:
    """Coefficients c_p with log K^a(t) - log H^a(t) = sum_p c_p t^(-p/2) for large t.

    Writes 1 - K = Q and K - H = D as series in s = t^(-1/2); Q uses
    int_0^a x^(2+2j) dx and D uses moments of the one-step down-crossing
    density, both from the exponential series of the entrance law.
    """
    x, w = np.polynomial.legendre.leggauss(400)
    half = 10.0
    xs = a + half * (x + 1)
    ws = half * w
    phi = lambda z: np.exp(-0.5 * z * z) / SQRT2PI
    # P(R(t+1) <= a | R(t) = x) for x > a, written with survival functions for stability
    pdown = ((phi(a + xs) - phi(a - xs)) / xs + special.ndtr(a - xs) - special.ndtr(-xs)
             + special.ndtr(-xs) - special.ndtr(-a - xs))
    c = math.sqrt(2 / math.pi)
    q = np.zeros(order)
    dcoef = np.zeros(order)
    for j in range(order):
        p = 3 + 2 * j
        if p >= order:
            break
        fac = c * (-0.5) ** j / math.factorial(j)
        q[p] = fac * a ** p / p
        dcoef[p] = fac * np.dot(ws, xs ** (2 + 2 * j) * pdown)

    def neg_log1m(v):
        out = np.zeros(order)
        pw = v.copy()
        m = 1
        while np.any(pw) and m < order:
            out += pw / m
            pw = np.convolve(pw, v)[:order]
            m += 1
        return out

    return neg_log1m(q + dcoef) - neg_log1m(q)


@dataclass
class ValleyEvaluator:
    """Numerical settings for the product law of the valley minimum.

    The product over k is summed directly for k < depth and the rest is
    taken from the large-t series of log(K/H), summed exactly with Hurwitz
    zeta values; ``product_depth`` caps the direct part.
    """

    product_depth: int = 100000
    product_tol: float = 1e-9
    quad_tol: float = 1e-9
    series_order: int = 40
    a_cutoff_tail: float = 1e-10
    last_truncation: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.product_depth < 1:
            raise ValueError("product_depth must be at least 1")
        if self.product_tol <= 0 or self.quad_tol <= 0:
            raise ValueError("tolerances must be positive")

    def depth(self, a: float) -> int:
        return int(min(self.product_depth, max(60, math.ceil(20 * a * a))))

    def g(self, a: float, u):
        """G^a(u) = P(R_3(u + k) > a for all k >= 0), vectorized over u."""
        if a <= 0:
            raise ValueError("a must be positive")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any((u <= 0) | (u >= 1)):
            raise ValueError("u must lie in (0, 1)")
        n = self.depth(a)
        h0 = np.clip(h_a(a, u), 0.0, None)
        t = u[:, None] + np.arange(1, n)[None, :]
        kk = k_a(a, t)
        hh = h_a(a, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.log(np.clip(hh, 1e-320, None)) - np.log(kk)
        direct = logs.sum(axis=1)
        coef = _tail_series(float(a), self.series_order)
        tail = np.zeros_like(u)
        last = 0.0
        for p in range(3, coef.size):
            if coef[p] != 0.0:
                term = coef[p] * special.zeta(p / 2.0, n + u)
                tail += term
                last = float(np.max(np.abs(term)))
        self.last_truncation = {"depth": n, "series_last_term": last}
        if last > self.product_tol:
            raise ArithmeticError(f"product tail series not converged at a={a} (last term {last:.3g})")
        out = h0 * np.exp(direct - tail)
        out[~np.isfinite(out)] = 0.0
        return out

    def tail(self, a: float) -> float:
        """P(M_0 > a) = 2 int_0^{1/2} G^a(u) G^a(1-u) du."""
        if a <= 0:
            return 1.0
        f = lambda u: float(np.prod(self.g(a, np.array([u, 1.0 - u]))))
        val, err = integrate.quad(f, 0.0, 0.5, epsabs=self.quad_tol * 0.1, epsrel=self.quad_tol, limit=100)
        return 2.0 * val

    def tail_unsymmetrized(self, a: float) -> float:
        f = lambda u: float(self.g(a, u)[0] * self.g(a, 1.0 - u)[0])
        val, _ = integrate.quad(f, 0.0, 1.0, epsabs=self.quad_tol * 0.1, epsrel=self.quad_tol, limit=100)
        return val

    def cutoff(self) -> float:
        """Smallest a on a coarse grid with tail below the cutoff, using the K^a(1/2)^2 envelope first."""
        a = 1.0
        while k_a(a, 0.5) ** 2 > self.a_cutoff_tail:
            a += 0.25
        return a

    def mean(self) -> tuple[float, float]:
        """E M_0 = int_0^A P(M_0 > a) da, with the remainder past A bounded by the envelope."""
        upper = self.cutoff()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(self.tail, 0.0, upper, epsabs=1e-9, epsrel=1e-9, limit=100)
        rem, _ = integrate.quad(lambda a: float(k_a(a, 0.5)) ** 2, upper, upper + 20)
        return val, err + rem


_DEFAULT = ValleyEvaluator()


def g_a(a: float, u: float, evaluator: ValleyEvaluator | None = None) -> float:
    ev = evaluator or _DEFAULT
    return float(ev.g(a, u)[0])


def valley_tail(a: float, evaluator: ValleyEvaluator | None = None) -> float:
    return (evaluator or _DEFAULT).tail(a)


def valley_mean(evaluator: ValleyEvaluator | None = None) -> tuple[float, float]:
    """Mean of the valley minimum from the product formula, with an error estimate."""
    return (evaluator or _DEFAULT).mean()


# ---------------------------------------------------------------- samplers

def sample_bes3_grid(times, seed: int, reps: int = 1) -> np.ndarray:
    """Exact BES(3) values at increasing times, as norms of 3-D Brownian motion; shape (reps, len(times))."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be nonnegative and strictly increasing")
    rng = make_rng(seed)
    dt = np.diff(np.concatenate([[0.0], t]))
    steps = rng.standard_normal((reps, t.size, 3)) * np.sqrt(dt)[None, :, None]
    return np.linalg.norm(np.cumsum(steps, axis=1), axis=2)


def mc_k_a(a: float, t: float, reps: int, seed: int) -> np.ndarray:
    r = sample_bes3_grid([t], seed, reps)[:, 0]
    return r > a


def mc_h_a(a: float, t: float, reps: int, seed: int) -> np.ndarray:
    r = sample_bes3_grid([t, t + 1.0], seed, reps)
    return (r[:, 0] > a) & (r[:, 1] > a)


def mc_g_a(a: float, u: float, reps: int, seed: int, max_steps: int = 10**7) -> np.ndarray:
    """Indicators of {R_3(u + k) > a for all k}, exact via the return probability a/r."""
    return kern.bes3_min_on_grid(reps, u, a, max_steps, int(make_rng(seed).integers(2**31 - 1)))


@dataclass(frozen=True, eq=False)
class ValleySample:
    """Order statistics M_0..M_K of the valley on a shifted unit grid, one row per replica."""

    u: np.ndarray
    order_stats: np.ndarray
    truncated: np.ndarray

    @property
    def m0(self) -> np.ndarray:
        return self.order_stats[:, 0]

    def shifted(self) -> np.ndarray:
        """W_k = M_k - M_0."""
        return self.order_stats - self.order_stats[:, :1]

    def gaps(self) -> np.ndarray:
        return np.diff(self.order_stats, axis=1)


def mc_valley_order_stats(K: int, horizon: int, reps: int, seed: int, chunk: int = 50000) -> ValleySample:
    """Sample (M_0, ..., M_K) exactly.

    Both arms are run on their grids; once an arm sits above the current
    (K+1)-th smallest value w it either escapes forever (probability 1 - w/r)
    or is restarted from w after a Brownian first-passage time.  ``horizon``
    caps the number of grid steps per arm; replicas hitting the cap are
    flagged in ``truncated``.
    """
    if K < 0 or reps < 1 or horizon < 1:
        raise ValueError("need K >= 0, reps >= 1, horizon >= 1")
    parts, us, flags = [], [], []
    for c, start in enumerate(range(0, reps, chunk)):
        m = min(chunk, reps - start)
        s = int(make_rng(seed, c).integers(2**31 - 1))
        o, u, f = kern.valley_order_stats(m, K, horizon, s)
        parts.append(o)
        us.append(u)
        flags.append(f)
    return ValleySample(np.concatenate(us), np.concatenate(parts), np.concatenate(flags))


@dataclass(frozen=True, eq=False)
class DiscretizationResult:
    difference: np.ndarray
    n: int
    substeps: int
    method: str


def discretization_experiment(n: int, substeps: int, reps: int, seed: int, method: str = "grid",
                              window: float = 5.0, chunk: int = 200) -> DiscretizationResult:
    """Law of (walk minimum) - (Brownian minimum) for a standard Gaussian walk embedded in Brownian motion.

    The walk is drawn at integer times.  With ``method="grid"`` the Brownian
    path is filled in on ``substeps`` points per unit interval by Brownian
    bridges, but only on intervals whose endpoints come within ``window`` of
    the walk minimum (elsewhere the bridge dips that far with probability
    below exp(-2 window^2)).  ``method="exact"`` draws each bridge minimum
    exactly instead.
    """
    if substeps < 100 and method == "grid":
        raise ValueError("substeps must be at least 100")
    if method not in ("grid", "exact"):
        raise ValueError("method must be 'grid' or 'exact'")
    out = np.empty(reps)
    sd = math.sqrt(1.0 / substeps)
    grid = np.arange(1, substeps) / substeps
    for c, start in enumerate(range(0, reps, chunk)):
        m = min(chunk, reps - start)
        rng = make_rng(seed, c)
        s = np.zeros((m, n + 1))
        np.cumsum(rng.standard_normal((m, n)), axis=1, out=s[:, 1:])
        walk_min = s.min(axis=1)
        lo = np.minimum(s[:, :-1], s[:, 1:])
        rows, cols = np.nonzero(lo < walk_min[:, None] + window)
        x0 = s[rows, cols]
        x1 = s[rows, cols + 1]
        if method == "exact":
            e = rng.exponential(size=x0.size)
            bmin = 0.5 * (x0 + x1 - np.sqrt((x1 - x0) ** 2 + 2.0 * e))
        else:
            bmin = np.empty(x0.size)
            step = 2000
            for i in range(0, x0.size, step):
                j = slice(i, i + step)
                w = np.cumsum(sd * rng.standard_normal((x0[j].size, substeps)), axis=1)
                bridge = w[:, :-1] - grid[None, :] * w[:, -1:]
                path = x0[j, None] + (x1[j] - x0[j])[:, None] * grid[None, :] + bridge
                bmin[j] = np.minimum(path.min(axis=1), np.minimum(x0[j], x1[j]))
        bm = np.full(m, np.inf)
        np.minimum.at(bm, rows, bmin)
        out[start:start + m] = walk_min - np.minimum(bm, walk_min)
    return DiscretizationResult(out, n, substeps, method)
