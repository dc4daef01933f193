"""Exact combinatorics and samplers for the simple symmetric walk."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Hashable, Iterable, Union

import numpy as np

from . import _kernels as kern
from .walk import make_rng

MAX_ENUM_N = 24


# ---------------------------------------------------------------- exact pmfs

@dataclass(frozen=True)
class ExactPmf:
    """Exact probability mass function with rational masses."""

    mass: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.mass.items():
            if not isinstance(v, Fraction) or v <= 0:
                raise ValueError(f"mass at {k!r} must be a positive Fraction")
        if self.mass and sum(self.mass.values()) != 1:
            raise ValueError("masses must sum to exactly 1")

    @classmethod
    def from_counts(cls, counts: dict, total: int | None = None) -> "ExactPmf":
        total = sum(counts.values()) if total is None else total
        return cls({k: Fraction(int(c), int(total)) for k, c in counts.items() if c})

    @property
    def support(self) -> list:
        return sorted(self.mass)

    def mean(self) -> Fraction:
        return sum((Fraction(k) * p for k, p in self.mass.items()), Fraction(0))

    def expect(self, f: Callable) -> Fraction:
        return sum((Fraction(f(k)) * p for k, p in self.mass.items()), Fraction(0))

    def map(self, f: Callable) -> "ExactPmf":
        out: dict = {}
        for k, p in self.mass.items():
            key = f(k)
            out[key] = out.get(key, Fraction(0)) + p
        return ExactPmf(out)

    def __getitem__(self, key) -> Fraction:
        return self.mass.get(key, Fraction(0))

    def __eq__(self, other) -> bool:
        return isinstance(other, ExactPmf) and self.mass == other.mass

    def to_dict(self) -> dict:
        keys = self.support
        return {
            "support": [list(k) if isinstance(k, tuple) else k for k in keys],
            "numerator": [self.mass[k].numerator for k in keys],
            "denominator": [self.mass[k].denominator for k in keys],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExactPmf":
        keys = [tuple(k) if isinstance(k, list) else k for k in d["support"]]
        return cls({k: Fraction(a, b) for k, a, b in zip(keys, d["numerator"], d["denominator"])})


def convolve(p: ExactPmf, q: ExactPmf) -> ExactPmf:
    out: dict = {}
    for a, pa in p.mass.items():
        for b, qb in q.mass.items():
            out[a + b] = out.get(a + b, Fraction(0)) + pa * qb
    return ExactPmf(out)


# ---------------------------------------------------------------- closed forms

def central_term(m: int) -> Fraction:
    """u_m = C(2m, m) / 4^m."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return Fraction(comb(2 * m, m), 4 ** m)


def expected_gap_limit(k: int) -> Fraction:
    """Limit mean gap E D_k = u_{floor(k/2)} / 2."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return central_term(k // 2) / 2


def expected_gap_gf(z: float, terms: int = 200) -> tuple[float, float]:
    """Partial sum of sum_k E D_k z^k and its closed form ((1+z)/sqrt(1-z^2) - 1)/2."""
    partial = 0.0
    u = 1.0
    for k in range(1, terms + 1):
        m = k // 2
        if k % 2 == 0:
            u *= (2 * m - 1) / (2 * m)
        partial += 0.5 * u * z ** k
    closed = 0.5 * ((1 + z) / np.sqrt(1 - z * z) - 1)
    return partial, float(closed)


def spitzer_expected_max(n: int) -> Fraction:
    """E max_{k<=n} S_k as the sum of E S_k^+ / k."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return sum((expected_gap_limit(k) for k in range(1, n + 1)), Fraction(0))


def chebyshev_v(k: int, x):
    """Chebyshev polynomial of the third kind, V_0 = 1, V_1 = 2x - 1."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if isinstance(x, np.ndarray):
        x = x.astype(float)
    v0, v1 = x * 0 + 1, 2 * x - 1
    if k == 0:
        return v0
    for _ in range(k - 1):
        v0, v1 = v1, 2 * x * v1 - v0
    return v1


def _check_z(z) -> None:
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0) or np.any(z_arr > 1):
        raise ValueError("z must lie in (0, 1]")


def passage_gf(k: int, z):
    """g_k(z) = 1 / V_k(1/z), the generating function of the passage-time variables."""
    _check_z(z)
    if isinstance(z, Fraction):
        return 1 / chebyshev_v(k, 1 / z)
    return 1.0 / chebyshev_v(k, 1.0 / np.asarray(z, dtype=float))


def eta_gf(k: int, z):
    """E z^{eta_k} = 1 / (V_k(1/z) V_{k+1}(1/z))."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return passage_gf(k, z) * passage_gf(k + 1, z)


# ---------------------------------------------------------------- enumeration

def _blocks(n: int, block_bits: int = 16) -> Iterable[np.ndarray]:
    """All 2^n sign sequences as partial-sum rows, in blocks."""
    bits = min(n, block_bits)
    low = ((np.arange(1 << bits)[:, None] >> np.arange(bits)) & 1).astype(np.int8)
    for hi in range(1 << (n - bits)):
        hb = ((hi >> np.arange(n - bits)) & 1).astype(np.int8)
        x = np.empty((low.shape[0], n), dtype=np.int8)
        x[:, :bits] = low
        x[:, bits:] = hb
        x = 2 * x - 1
        s = np.zeros((x.shape[0], n + 1), dtype=np.int16)
        np.cumsum(x, axis=1, out=s[:, 1:])
        yield s


def _row_stat(sums_row: np.ndarray, name: str):
    from .feller import decompose, ladder_variables, split_at_argmin
    from .walk import WalkPath

    path = WalkPath.from_sums(sums_row.astype(np.int64))
    if name == "feller_pair":
        p = decompose(path)
        return (tuple(p.up.tolist()), tuple((-p.down).tolist()))
    if name == "split_pair":
        post, pre = split_at_argmin(path)
        return (tuple(post.tolist()), tuple(pre.tolist()))
    if name == "ladder":
        rec = ladder_variables(path)
        return (tuple(rec.strict_ascending), tuple(rec.weak_descending))
    raise ValueError(f"unknown statistic {name!r}")


def _vector_stat(s: np.ndarray, name: str, arg):
    """Statistic for a block of partial-sum rows; returns an array (scalar stats) or a 2-D array."""
    if name == "min":
        return s.min(axis=1)
    if name == "max":
        return s.max(axis=1)
    if name == "final":
        return s[:, -1]
    if name == "argmin":
        return s.shape[1] - 1 - np.argmin(s[:, ::-1], axis=1)
    srt = np.sort(s, axis=1)
    if name == "order":
        return srt[:, arg]
    if name == "gap":
        return srt[:, arg] - srt[:, arg - 1]
    if name == "order_stats":
        return srt
    if name == "gaps":
        return np.diff(srt, axis=1)
    raise ValueError(f"unknown statistic {name!r}")


def parse_statistic(stat: str) -> tuple[str, int | None]:
    name, _, arg = stat.partition(":")
    return name, (int(arg) if arg else None)


def enumerate_walks(n: int, statistic: Union[str, Callable]) -> ExactPmf:
    """Exact law of a statistic over all 2^n equally likely simple-walk paths.

    ``statistic`` is a selector string (``min``, ``max``, ``final``,
    ``argmin``, ``order:k``, ``gap:k``, ``order_stats``, ``gaps``,
    ``feller_pair``, ``split_pair``, ``ladder``) or a callable mapping a
    partial-sum row to a hashable value.
    """
    if not 0 <= n <= MAX_ENUM_N:
        raise ValueError(f"enumeration needs 0 <= n <= {MAX_ENUM_N}")
    if n == 0:
        s0 = np.zeros((1, 1), dtype=np.int16)
        blocks: Iterable[np.ndarray] = [s0]
    else:
        blocks = _blocks(n)
    counts: Counter = Counter()
    if callable(statistic):
        for s in blocks:
            counts.update(statistic(row) for row in s)
        return ExactPmf.from_counts(dict(counts), 1 << n)
    name, arg = parse_statistic(statistic)
    if name in ("order", "gap") and (arg is None or not (0 if name == "order" else 1) <= arg <= n):
        raise ValueError(f"{name} index out of range for n={n}")
    for s in blocks:
        if name in ("feller_pair", "split_pair", "ladder"):
            counts.update(_row_stat(row, name) for row in s)
            continue
        v = _vector_stat(s, name, arg)
        if v.ndim == 1:
            keys, c = np.unique(v, return_counts=True)
            counts.update({int(k): int(cc) for k, cc in zip(keys, c)})
        else:
            keys, c = np.unique(v, axis=0, return_counts=True)
            counts.update({tuple(int(t) for t in k): int(cc) for k, cc in zip(keys, c)})
    return ExactPmf.from_counts(dict(counts), 1 << n)


def wendel_convolution(k: int, n: int) -> ExactPmf:
    """Law of max over k steps plus an independent min over n - k steps."""
    if not 0 <= k <= n <= MAX_ENUM_N:
        raise ValueError("need 0 <= k <= n <= 24")
    return convolve(enumerate_walks(k, "max"), enumerate_walks(n - k, "min"))


def expected_positive_part_ratio(k: int) -> Fraction:
    """E S_k^+ / k by enumeration."""
    return enumerate_walks(k, "final").expect(lambda v: max(v, 0)) / k


def expected_negative_part_ratio(k: int) -> Fraction:
    return enumerate_walks(k, "final").expect(lambda v: max(-v, 0)) / k


# ---------------------------------------------------------------- branching representation

@dataclass(frozen=True)
class BranchingConfig:
    immigration: int = 2
    initial: int = 1

    def __post_init__(self):
        if self.immigration not in (0, 1, 2):
            raise ValueError("immigration must be 0, 1 or 2")
        if self.initial < 0:
            raise ValueError("initial population must be nonnegative")


def geo0(p: float, size, rng: np.random.Generator) -> np.ndarray:
    """Geometric on {0, 1, ...} with P(k) = p (1-p)^k."""
    return rng.geometric(p, size=size) - 1


def geo1(p: float, size, rng: np.random.Generator) -> np.ndarray:
    """Geometric on {1, 2, ...} with P(k) = p (1-p)^(k-1)."""
    return rng.geometric(p, size=size)


def _offspring_sum(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sum of z independent Geo0(1/2) variables, elementwise."""
    out = np.zeros_like(z)
    pos = z > 0
    if np.any(pos):
        out[pos] = rng.negative_binomial(z[pos], 0.5)
    return out


def branching_process(config: BranchingConfig, generations: int, reps: int,
                      rng: np.random.Generator) -> np.ndarray:
    """``(reps, generations + 1)`` array; column 0 is the initial population."""
    z = np.empty((reps, generations + 1), dtype=np.int64)
    z[:, 0] = config.initial
    for g in range(1, generations + 1):
        z[:, g] = config.immigration + _offspring_sum(z[:, g - 1], rng)
    return z


def double_immigration(levels: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Z_0..Z_levels of the double-immigration process started from Z_{-1} = 1."""
    z = branching_process(BranchingConfig(2, 1), levels + 1, reps, rng)
    return z[:, 1:]


def sample_knight_chains(levels: int, seed: int, reps: int | None = None):
    """Upcrossing counts of the two chains, as single-immigration Geo0(1/2) branching processes.

    The upward process starts from Z_{-1} = 0 (so Z_0 = 1); the downward one
    is shifted a step forward, starting from Z_{-1} = 1, which makes Z_0
    Geo1(1/2).  Returns ``(z_up, z_down)`` of shape ``(levels+1,)`` or
    ``(reps, levels+1)``.
    """
    if levels < 0:
        raise ValueError("levels must be nonnegative")
    rng = make_rng(seed)
    r = 1 if reps is None else reps
    zu = branching_process(BranchingConfig(1, 0), levels + 1, r, rng)[:, 1:]
    zd = branching_process(BranchingConfig(1, 1), levels + 1, r, rng)[:, 1:]
    if reps is None:
        return zu[0], zd[0]
    return zu, zd


@dataclass(frozen=True, eq=False)
class OccupationCounts:
    l: np.ndarray

    def __post_init__(self):
        if self.l.size and (self.l[0] < 1 or np.any(self.l < 0)):
            raise ValueError("need L_0 >= 1 and L >= 0")

    @property
    def eta(self) -> np.ndarray:
        return np.cumsum(self.l)


def occupation_from_branching(z) -> OccupationCounts:
    """L_l = Z_{l-1} + Z_l - 2 with Z_{-1} = 1, for one double-immigration sample Z_0..Z_m."""
    z = np.asarray(z, dtype=np.int64)
    prev = np.concatenate([[1], z[:-1]])
    return OccupationCounts(prev + z - 2)


def occupations_from_branching(z: np.ndarray) -> np.ndarray:
    """Row-wise version of :func:`occupation_from_branching`."""
    prev = np.concatenate([np.ones((z.shape[0], 1), dtype=z.dtype), z[:, :-1]], axis=1)
    return prev + z - 2


def conditional_occupation(level: int, k: int, seed: int, size: int = 1) -> np.ndarray:
    """Samples of L_level given L_0 = k: two Geo1(1/(2l)) plus k-1 Bernoulli(1/l)-thinned copies."""
    if level < 1 or k < 1:
        raise ValueError("level and k must be at least 1")
    rng = make_rng(seed)
    p = 1.0 / (2 * level)
    g = geo1(p, (size, k + 1), rng)
    b = rng.random((size, k - 1)) < 1.0 / level
    return g[:, 0] + g[:, k] + (b * g[:, 1:k]).sum(axis=1)


# ---------------------------------------------------------------- exact chain samplers

def _numba_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def upward_chain_step(x: int, seed_or_rng) -> int:
    """One transition of the upward chain: x+1 w.p. (x+1)/(2x), else x-1."""
    if x < 1:
        raise ValueError("upward chain lives on {1, 2, ...}")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    return x + 1 if rng.random() * (2 * x) < x + 1 else x - 1


def downward_chain_step(y: int, seed_or_rng) -> int:
    """One transition of the negated downward chain: y+1 w.p. (y+2)/(2(y+1)), else y-1."""
    if y < 0:
        raise ValueError("negated downward chain lives on {0, 1, ...}")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    return y + 1 if rng.random() * (2 * (y + 1)) < y + 2 else y - 1


def upward_chain_paths(reps: int, steps: int, seed: int) -> np.ndarray:
    return kern.up_chain_paths(reps, steps, _numba_seed(make_rng(seed)))


def chain_occupations(levels: int, reps: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact infinite-horizon occupation counts of levels 0..levels for both chains."""
    return kern.chain_occupations(reps, levels, _numba_seed(make_rng(seed)))


def walk_occupations(levels: int, reps: int, horizon: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Occupation counts read off the Feller chains of simulated walks of length ``horizon``.

    Each walk is then continued exactly until neither chain can come back to
    the counted levels, so the counts follow the infinite-horizon law.
    """
    rng = make_rng(seed)
    words = rng.bit_generator.random_raw((reps, (horizon + 63) // 64)).astype(np.uint64)
    lu, ld, s, u, d = kern.walk_chain_occupations(words, horizon, levels)
    cu, cd = kern.complete_walk_counts(s, u, d, levels, _numba_seed(rng))
    return lu + cu, ld + cd


def complete_chain_values(s: int, up: int, down: int, level: int, rng: np.random.Generator) -> np.ndarray:
    """Chain values at or below ``level`` still to come after a walk in state (S, up value, down value)."""
    one = lambda v: np.array([v], dtype=np.int64)
    cu, cd = kern.complete_walk_counts(one(s), one(up), one(down), level, _numba_seed(rng))
    return np.repeat(np.arange(level + 1), cu[0] + cd[0])


def eta_from_occupations(lu: np.ndarray, ld: np.ndarray, k: int) -> np.ndarray:
    """eta_k = number of limit order statistics at or below level k (W_0 included)."""
    return lu[:, : k + 1].sum(axis=1) + ld[:, : k + 1].sum(axis=1)


def sample_eta(k: int, reps: int, seed: int, method: str = "chains") -> np.ndarray:
    if method == "chains":
        lu, ld = chain_occupations(k, reps, seed)
        return eta_from_occupations(lu, ld, k)
    if method == "branching":
        z = double_immigration(k, reps, make_rng(seed))
        return occupations_from_branching(z).sum(axis=1)
    raise ValueError(f"unknown method {method!r}")


def sample_n0plus_passage(k: int, reps: int, seed: int) -> np.ndarray:
    """N_{0+}(tau_k): nonnegative landings of the walk up to its first passage to k."""
    return kern.n0plus_at_passage(reps, k, _numba_seed(make_rng(seed)))


def sample_reflected_passage(k: int, reps: int, seed: int) -> np.ndarray:
    """First passage of the walk reflected at its running minimum to level k."""
    return kern.reflected_passage(reps, k, _numba_seed(make_rng(seed)))


def sample_eta_up(k: int, reps: int, seed: int) -> np.ndarray:
    """Total occupation of levels 1..k by the upward chain."""
    return kern.up_chain_low_occupation(reps, k, _numba_seed(make_rng(seed)))


def prob_min_unique(n: int, reps: int, seed: int, chunk: int = 20000) -> np.ndarray:
    """Per-replica indicator of D_{1,n} = 1 (the minimum of n steps is attained once)."""
    out = []
    nw = (n + 63) // 64
    for c, start in enumerate(range(0, reps, chunk)):
        m = min(chunk, reps - start)
        rng = make_rng(seed, c)
        words = rng.bit_generator.random_raw((m, nw)).astype(np.uint64)
        out.append(kern.min_attained_once(words, n))
    return np.concatenate(out)


def exact_gap_one(n: int) -> Fraction:
    """Exact E D_{1,n} = P(D_{1,n} = 1) = 1/2 + E S_n^- / n for the simple walk."""
    # E|S_n| via the binomial law, without enumerating 2^n paths
    total = Fraction(0)
    for j in range(n + 1):
        s = 2 * j - n
        if s < 0:
            total += Fraction(comb(n, j) * (-s), 1)
    return Fraction(1, 2) + total / (Fraction(2) ** n) / n


def upcrossings_from_occupations(lu: np.ndarray, ld: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Upcrossing counts U_l (from l to l+1) of both chains, recovered from level occupations.

    Both chains drift to infinity, so every level below the last value is
    left upward once more than it is entered from above.  For the upward
    chain (level 0 not counted) this gives L_l = U_{l-1} + U_l - 1 with
    U_0 = 1; for the negated downward chain L_0 = U_0 and the same recursion
    holds above 0.  The last column is only valid when it lies below the
    occupation cap, which callers arrange by asking for one extra level.
    """
    zu = np.empty_like(lu)
    zd = np.empty_like(ld)
    zu[:, 0] = 1
    zd[:, 0] = ld[:, 0]
    for j in range(1, lu.shape[1]):
        zu[:, j] = lu[:, j] - zu[:, j - 1] + 1
        zd[:, j] = ld[:, j] - zd[:, j - 1] + 1
    return zu, zd


def decomposition_up_chain(steps: int, reps: int, seed: int) -> np.ndarray:
    """S↑_0..S↑_steps read off simulated simple walks.

    Negative excursions do not touch the upward chain and end at 0 almost
    surely, so each one is collapsed to its return; after that the next
    positive landing is +1.  Shape (reps, steps + 1).
    """
    rng = make_rng(seed)
    out = np.zeros((reps, steps + 1), dtype=np.int64)
    s = np.zeros(reps, dtype=np.int64)
    u = np.zeros(reps, dtype=np.int64)
    count = np.zeros(reps, dtype=np.int64)
    active = np.arange(reps)
    while active.size:
        sa = s[active]
        x = np.where(sa == 0, 1, 2 * rng.integers(0, 2, size=active.size) - 1)
        sa = sa + x
        landed = sa > 0
        s[active] = sa
        idx = active[landed]
        u[idx] += x[landed]
        count[idx] += 1
        out[idx, count[idx]] = u[idx]
        active = active[count[active] < steps]
    return out
