"""Upward and downward Feller chains of a walk: decomposition, exact recovery, ladders, limit order statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .walk import (
    IncrementSpec,
    Mixture,
    SimpleSymmetric,
    WalkPath,
    _frozen,
    make_rng,
    sample_increments,
    validate_spec,
)


@dataclass(frozen=True, eq=False)
class FellerPair:
    """The two chains of a finite path, with the bookkeeping needed to invert the split.

    ``up`` collects increments taken when the walk lands strictly above zero,
    ``down`` those taken when it lands at or below zero.  The raw increments
    are kept alongside the partial sums so that recovery is bitwise exact for
    floating-point walks.
    """

    up: np.ndarray
    down: np.ndarray
    n_plus: int
    n_minus: int
    indicator: np.ndarray
    up_increments: np.ndarray
    down_increments: np.ndarray

    @classmethod
    def from_chains(cls, up: Sequence, down: Sequence) -> "FellerPair":
        """Build a pair from chain values alone; the indicator is reconstructed lazily by recovery."""
        up = np.asarray(up)
        down = np.asarray(down)
        if up.size == 0 or down.size == 0 or up[0] != 0 or down[0] != 0:
            raise ValueError("both chains must start at 0")
        if np.any(up[1:] <= 0):
            raise ValueError("upward chain values after index 0 must be positive")
        if np.any(down > 0):
            raise ValueError("downward chain values must be nonpositive")
        n_plus, n_minus = up.size - 1, down.size - 1
        ind = np.full(n_plus + n_minus, -1, dtype=np.int8)
        return cls(_frozen(up), _frozen(down), n_plus, n_minus, _frozen(ind),
                   _frozen(np.diff(up)), _frozen(np.diff(down)))

    @property
    def n(self) -> int:
        return self.n_plus + self.n_minus

    def to_dict(self) -> dict:
        return {
            "up": self.up.tolist(),
            "down": self.down.tolist(),
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "indicator": self.indicator.tolist(),
        }


def decompose(path: WalkPath) -> FellerPair:
    x = path.increments
    pos = path.sums[1:] > 0
    xu, xd = x[pos], x[~pos]
    zero = np.zeros(1, dtype=x.dtype)
    up = np.concatenate([zero, np.cumsum(xu)])
    down = np.concatenate([zero, np.cumsum(xd)])
    return FellerPair(_frozen(up), _frozen(down), int(pos.sum()), int((~pos).sum()),
                      _frozen(pos.astype(np.int8)), _frozen(xu), _frozen(xd))


def recover_reverse_induction(pair: FellerPair) -> WalkPath:
    """Rebuild the walk from its two chains by peeling off steps from the end.

    At step k the value S_k = up[i] + down[j] is known from the current counts
    (i, j); its sign says which chain supplied X_k, so that count drops by one.
    """
    i, j = pair.n_plus, pair.n_minus
    n = i + j
    up, down = pair.up, pair.down
    xu, xd = pair.up_increments, pair.down_increments
    out = np.empty(n, dtype=np.result_type(xu.dtype, xd.dtype))
    for k in range(n, 0, -1):
        if up[i] + down[j] > 0:
            if i == 0:
                raise ValueError(f"inconsistent pair: positive value at step {k} but upward chain is exhausted")
            out[k - 1] = xu[i - 1]
            i -= 1
        else:
            if j == 0:
                raise ValueError(f"inconsistent pair: nonpositive value at step {k} but downward chain is exhausted")
            out[k - 1] = xd[j - 1]
            j -= 1
    return WalkPath.from_increments(out)


@dataclass(frozen=True, eq=False)
class ChainSegment:
    values: np.ndarray
    kind: str
    increments: np.ndarray

    @property
    def final(self):
        return self.values[-1]

    @property
    def initial(self):
        return self.values[0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": self.values.tolist()}


def _split_times(values: np.ndarray, ascending: bool) -> list[int]:
    """Future-minimum times (ascending) or future-maximum times (descending), excluding time 0."""
    v = values if ascending else -values
    n = v.size - 1
    if n == 0:
        return []
    # last index attaining the minimum of v[i:] for every i
    suf = np.empty(n + 1, dtype=np.int64)
    best = n
    suf[n] = n
    for i in range(n - 1, 0, -1):
        if v[i] < v[best]:
            best = i
        suf[i] = best
    times = []
    g = 0
    while g < n:
        g = int(suf[g + 1])
        times.append(g)
    return times


def chain_segments(chain: Sequence, kind: str = "ascending", increments: Sequence | None = None,
                   horizon: int | None = None) -> list[ChainSegment]:
    """Split a chain started at 0 at its future-minimum (or future-maximum) times."""
    if kind not in ("ascending", "descending"):
        raise ValueError("kind must be 'ascending' or 'descending'")
    values = np.asarray(chain)
    if horizon is not None:
        values = values[: horizon + 1]
    if values.size == 0 or values[0] != 0:
        raise ValueError("chain must start at 0")
    inc = np.diff(values) if increments is None else np.asarray(increments)[: values.size - 1]
    segs = []
    prev = 0
    for g in _split_times(values, kind == "ascending"):
        segs.append(ChainSegment(_frozen(values[prev:g + 1]), kind, _frozen(inc[prev:g])))
        prev = g
    return segs


def pair_segments(pair: FellerPair) -> tuple[list[ChainSegment], list[ChainSegment]]:
    asc = chain_segments(pair.up, "ascending", pair.up_increments)
    desc = chain_segments(pair.down, "descending", pair.down_increments)
    return asc, desc


def _check_segments(asc: list[ChainSegment], desc: list[ChainSegment]) -> None:
    for group, kind in ((asc, "ascending"), (desc, "descending")):
        finals = [s.final for s in group]
        for s in group:
            if s.kind != kind:
                raise ValueError(f"expected {kind} segment, got {s.kind}")
            if s.values.size < 2 or s.increments.size != s.values.size - 1:
                raise ValueError("malformed segment")
        if kind == "ascending":
            if any(f <= 0 for f in finals) or any(b <= a for a, b in zip(finals, finals[1:])):
                raise ValueError("ascending segment finals must be positive and strictly increasing")
        else:
            if any(f > 0 for f in finals) or any(b >= a for a, b in zip(finals, finals[1:])):
                raise ValueError("descending segment finals must be nonpositive and strictly decreasing")


def riffle_reconstruct(asc: list[ChainSegment], desc: list[ChainSegment]) -> WalkPath:
    """Interleave segments by increasing absolute final value, ascending first on ties."""
    _check_segments(asc, desc)
    keyed = [(abs(s.final), 0, i, s) for i, s in enumerate(asc)]
    keyed += [(abs(s.final), 1, i, s) for i, s in enumerate(desc)]
    keyed.sort(key=lambda t: (t[0], t[1], t[2]))
    if not keyed:
        return WalkPath.from_increments(np.zeros(0, dtype=np.int64))
    return WalkPath.from_increments(np.concatenate([t[3].increments for t in keyed]))


@dataclass(frozen=True)
class LadderRecord:
    strict_ascending: list
    weak_descending: list

    def to_dict(self) -> dict:
        return {"strict_ascending": [list(map(_num, p)) for p in self.strict_ascending],
                "weak_descending": [list(map(_num, p)) for p in self.weak_descending]}


def _num(v):
    return v.item() if hasattr(v, "item") else v


def ladder_variables(path: WalkPath) -> LadderRecord:
    s = path.sums
    if s.size < 2:
        return LadderRecord([], [])
    prev_max = np.maximum.accumulate(s)[:-1]
    prev_min = np.minimum.accumulate(s)[:-1]
    k = np.arange(1, s.size)
    up = k[s[1:] > prev_max]
    dn = k[s[1:] <= prev_min]
    return LadderRecord([(int(i), _num(s[i])) for i in up], [(int(i), _num(s[i])) for i in dn])


def chain_values(pair: FellerPair) -> np.ndarray:
    """The multiset {-down_0, ..., -down_N-} together with {up_1, ..., up_N+}."""
    return np.concatenate([-pair.down, pair.up[1:]])


def split_at_argmin(path: WalkPath) -> tuple[np.ndarray, np.ndarray]:
    """Post-minimum and reversed pre-minimum fragments, both shifted to start at 0."""
    s = path.sums
    a = int(s.size - 1 - np.argmin(s[::-1]))
    return s[a:] - s[a], s[a::-1] - s[a]


@dataclass(frozen=True, eq=False)
class LimitOrderStats:
    w: np.ndarray
    horizon_used: int
    certified: bool
    guard: float
    rule: str = "heuristic"

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "horizon_used": self.horizon_used,
                "certified": self.certified, "guard": float(self.guard), "rule": self.rule}


def _has_drift(spec: IncrementSpec) -> bool:
    if isinstance(spec, Mixture):
        return any(abs(s.mean) > 0 for s in spec.specs)
    return abs(spec.mean) > 0


def limit_order_stats(spec: IncrementSpec, K: int, max_horizon: int, safety: float = 4.0,
                      seed: int = 0) -> LimitOrderStats:
    """W_1..W_K of the limit process from one long walk split into its Feller chains.

    The horizon doubles until the certification rule fires: both chains sit
    above ``safety * W_K`` and neither dipped to ``W_K`` over the trailing
    half of its run.  For the simple walk the walk is instead continued
    exactly until neither chain can return to W_K, so the result is always
    certified.
    """
    validate_spec(spec)
    if K < 1:
        raise ValueError("K must be at least 1")
    if max_horizon < K:
        raise ValueError("max_horizon must be at least K")
    if _has_drift(spec):
        raise ValueError("limit_order_stats needs an oscillating walk; nonzero drift is rejected")
    rng = make_rng(seed)
    h = int(min(max(64, 8 * K), max_horizon))
    incr = sample_increments(spec, 1, h, rng)[0]
    while True:
        pair = decompose(WalkPath.from_increments(incr))
        if isinstance(spec, SimpleSymmetric):
            from .ssrw import complete_chain_values

            vals = chain_values(pair)
            if vals.size >= K + 1:
                level = int(np.partition(vals, K)[K])
                extra = complete_chain_values(int(pair.up[-1] + pair.down[-1]), int(pair.up[-1]),
                                              int(pair.down[-1]), level, rng)
                vals = np.sort(np.concatenate([vals, extra]))
                return LimitOrderStats(_frozen(vals[1:K + 1].astype(float)), h, True, float(level), "exact-ssrw")
        else:
            vals = chain_values(pair)
            if vals.size >= K + 1:
                w = np.sort(vals)[: K + 1]
                wk = w[K]
                upv = pair.up[1:]
                dnv = -pair.down
                guard = np.inf
                ok = upv.size >= 2 and dnv.size >= 2
                if ok:
                    tail_up = upv[upv.size // 2:].min()
                    tail_dn = dnv[dnv.size // 2:].min()
                    guard = float(min(tail_up, tail_dn))
                    ok = (upv[-1] > safety * wk and dnv[-1] > safety * wk and tail_up > wk and tail_dn > wk)
                if ok or h >= max_horizon:
                    return LimitOrderStats(_frozen(w[1:]), h, bool(ok), guard)
        if h >= max_horizon:
            vals = np.sort(chain_values(pair))
            w = np.full(K, np.nan)
            w[: max(0, vals.size - 1)] = vals[1:K + 1]
            return LimitOrderStats(_frozen(w), h, False, float("nan"))
        new_h = int(min(2 * h, max_horizon))
        incr = np.concatenate([incr, sample_increments(spec, 1, new_h - h, rng)[0]])
        h = new_h


def w1_tail(ladder_tail_up: Callable[[float], float], ladder_tail_down: Callable[[float], float], w: float) -> float:
    """P(W_1 > w) as the product of the two ladder-height tails."""
    if w <= 0:
        raise ValueError("w must be positive")
    return float(ladder_tail_up(w)) * float(ladder_tail_down(w))


def sample_ladder_heights(spec: IncrementSpec, reps: int, seed: int, max_steps: int = 10**5,
                          block: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """First strict ascending ladder heights S_{tau+} and negated first weak descending heights -S_{tau-0}.

    Walks still unresolved after ``max_steps`` get NaN.
    """
    validate_spec(spec)
    rng = make_rng(seed)
    heights = []
    for ascending in (True, False):
        h = np.full(reps, np.nan)
        s = np.zeros(reps)
        active = np.arange(reps)
        done = 0
        while active.size and done < max_steps:
            x = np.asarray(sample_increments(spec, active.size, block, rng), dtype=float)
            path = s[active, None] + np.cumsum(x, axis=1)
            hit = path > 0 if ascending else path <= 0
            any_hit = hit.any(axis=1)
            first = np.argmax(hit, axis=1)
            rows = np.flatnonzero(any_hit)
            vals = path[rows, first[rows]]
            h[active[rows]] = vals if ascending else -vals
            s[active] = path[:, -1]
            active = active[~any_hit]
            done += block
        heights.append(h)
    return heights[0], heights[1]


def transience_exact(level: int, delta: float) -> float:
    """P(the SSRW upward chain, after first exceeding ``level``, ever drops below level*(1-delta)).

    From x the chain ever reaches j < x with probability j/x, and it first
    exceeds ``level`` at level+1.
    """
    j = int(np.ceil(level * (1 - delta))) - 1
    return max(j, 0) / (level + 1)


def transience_profile(levels: Sequence[int], delta: float, reps: int, horizon: int, seed: int) -> np.ndarray:
    """Fraction of simulated upward chains that drop below L*(1-delta) after first exceeding L, per level."""
    from .ssrw import upward_chain_paths

    paths = upward_chain_paths(reps, horizon, seed)
    out = []
    for level in levels:
        above = paths > level
        ok = above.any(axis=1)
        first = np.argmax(above, axis=1)
        # suffix minima give the running minimum after the first passage
        suffix_min = np.minimum.accumulate(paths[:, ::-1], axis=1)[:, ::-1]
        m = suffix_min[np.arange(reps), first]
        out.append(float(np.mean((m < level * (1 - delta)) & ok) / max(ok.mean(), 1e-300)))
    return np.array(out)
