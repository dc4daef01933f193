"""Compiled inner loops. Each kernel takes an explicit integer seed for numba's generator."""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit, prange

# numba falls back to its own thread pool when the system TBB is too old
warnings.filterwarnings("ignore", message="The TBB threading layer")


@njit(cache=True)
def seed_numba(seed):
    np.random.seed(seed)


# ---------------------------------------------------------------- simple walk

@njit(cache=True)
def min_attained_once(words, n):
    """For each row of random 64-bit words, walk n +-1 steps and report whether the minimum is unique."""
    reps = words.shape[0]
    out = np.zeros(reps, dtype=np.bool_)
    for r in range(reps):
        s = 0
        mn = 0
        cnt = 1
        for k in range(n):
            w = words[r, k >> 6]
            bit = (w >> np.uint64(k & 63)) & np.uint64(1)
            if bit == 1:
                s += 1
            else:
                s -= 1
            if s < mn:
                mn = s
                cnt = 1
            elif s == mn:
                cnt += 1
        out[r] = cnt == 1
    return out


@njit(cache=True)
def _up_occupation(x, started, m, counts):
    """Add future visits of the upward simple-walk chain to levels <= m, starting after state x.

    Transitions are x -> x+1 w.p. (x+1)/(2x).  From x > m the chain ever hits
    m with probability m/x, so the excursion above m collapses to one coin.
    """
    if not started:
        x = 1
        if m >= 1:
            counts[1] += 1
    if m == 0:
        return
    while True:
        if x > m:
            if np.random.random() * x >= m:
                return
            x = m
            counts[m] += 1
            continue
        if np.random.random() * (2 * x) < x + 1:
            x += 1
        else:
            x -= 1
        if x <= m:
            counts[x] += 1


@njit(cache=True)
def _down_occupation(y, m, counts):
    """Future visits of the negated downward chain to levels <= m, after state y >= 0.

    Transitions y -> y+1 w.p. (y+2)/(2(y+1)); from y > m the level m is hit
    with probability (m+1)/(y+1).
    """
    while True:
        if y > m:
            if np.random.random() * (y + 1) >= m + 1:
                return
            y = m
            counts[m] += 1
            continue
        if np.random.random() * (2 * (y + 1)) < y + 2:
            y += 1
        else:
            y -= 1
        if y <= m:
            counts[y] += 1


@njit(cache=True)
def chain_occupations(reps, m, seed):
    """Occupation counts of levels 0..m for both exact chains run from scratch."""
    np.random.seed(seed)
    lu = np.zeros((reps, m + 1), dtype=np.int64)
    ld = np.zeros((reps, m + 1), dtype=np.int64)
    for r in range(reps):
        _up_occupation(0, False, m, lu[r])
        ld[r, 0] += 1
        _down_occupation(0, m, ld[r])
    return lu, ld


@njit(cache=True)
def continue_walk_counts(s, u, d, m, lu, ld):
    """Run a simple walk forward from state (S, up value, down value) until no chain can revisit levels <= m.

    Inside a positive excursion the upward value is u0 + S and the excursion
    adds +1 to the up chain overall; a nonpositive stretch does the same for
    the negated down chain.  Stretches that leave the counting window come back
    to its boundary almost surely, so they are collapsed to a single jump.
    """
    while True:
        if s > 0:
            up_floor = u - s + 1
            dn_floor = -d + 1
        else:
            up_floor = u + 1
            dn_floor = -(d - s)
        if up_floor > m and dn_floor > m:
            return
        if s > 0 and u > m:
            if up_floor <= m:
                s -= u - m
                u = m
                lu[m] += 1
            else:
                u = u - s + 1
                s = 0
                d -= 1
                if -d <= m:
                    ld[-d] += 1
            continue
        if s <= 0 and -d > m:
            c = d - s
            if -c <= m:
                s = -c - m
                d = -m
                ld[m] += 1
            else:
                d = c
                s = 1
                u += 1
                if u <= m:
                    lu[u] += 1
            continue
        if np.random.random() < 0.5:
            x = 1
        else:
            x = -1
        s += x
        if s > 0:
            u += x
            if u <= m:
                lu[u] += 1
        else:
            d += x
            if -d <= m:
                ld[-d] += 1


@njit(cache=True)
def complete_walk_counts(s, u, d, m, seed):
    """Exact infinite-horizon continuation of the chain counts for each replica's walk state."""
    np.random.seed(seed)
    reps = s.shape[0]
    lu = np.zeros((reps, m + 1), dtype=np.int64)
    ld = np.zeros((reps, m + 1), dtype=np.int64)
    for r in range(reps):
        continue_walk_counts(s[r], u[r], d[r], m, lu[r], ld[r])
    return lu, ld


@njit(cache=True)
def walk_chain_occupations(words, n, m):
    """Walk n +-1 steps per row, split into Feller chains, count chain visits to levels <= m.

    Returns the prefix counts and the final (S, up, down) state for exact continuation.
    """
    reps = words.shape[0]
    lu = np.zeros((reps, m + 1), dtype=np.int64)
    ld = np.zeros((reps, m + 1), dtype=np.int64)
    ss = np.zeros(reps, dtype=np.int64)
    ups = np.zeros(reps, dtype=np.int64)
    downs = np.zeros(reps, dtype=np.int64)
    for r in range(reps):
        s = 0
        u = 0
        d = 0
        ld[r, 0] += 1
        for k in range(n):
            w = words[r, k >> 6]
            bit = (w >> np.uint64(k & 63)) & np.uint64(1)
            x = 1 if bit == 1 else -1
            s += x
            if s > 0:
                u += x
                if u <= m:
                    lu[r, u] += 1
            else:
                d += x
                if -d <= m:
                    ld[r, -d] += 1
        ss[r] = s
        ups[r] = u
        downs[r] = d
    return lu, ld, ss, ups, downs


@njit(cache=True)
def n0plus_at_passage(reps, k, seed):
    """Non-negative landings of the walk before first reaching k; each negative excursion counts once."""
    np.random.seed(seed)
    out = np.zeros(reps, dtype=np.int64)
    for r in range(reps):
        s = 0
        c = 0
        while s < k:
            if np.random.random() < 0.5:
                s += 1
                c += 1
            elif s > 0:
                s -= 1
                c += 1
            else:
                # excursion below 0 returns to 0 a.s.; only the return step lands on >= 0
                c += 1
        out[r] = c
    return out


@njit(cache=True)
def reflected_passage(reps, k, seed):
    """First time the walk minus its running minimum reaches k, simulated step by step."""
    np.random.seed(seed)
    out = np.zeros(reps, dtype=np.int64)
    for r in range(reps):
        s = 0
        mn = 0
        t = 0
        while s - mn < k:
            if np.random.random() < 0.5:
                s += 1
            else:
                s -= 1
                if s < mn:
                    mn = s
            t += 1
        out[r] = t
    return out


@njit(cache=True)
def up_chain_low_occupation(reps, k, seed):
    """Total time the upward chain spends in levels 1..k."""
    np.random.seed(seed)
    out = np.zeros(reps, dtype=np.int64)
    counts = np.zeros(k + 1, dtype=np.int64)
    for r in range(reps):
        counts[:] = 0
        _up_occupation(0, False, k, counts)
        out[r] = counts[1:].sum()
    return out


@njit(cache=True)
def up_chain_paths(reps, steps, seed):
    """Values of the upward chain started at 1 after each of ``steps`` transitions."""
    np.random.seed(seed)
    out = np.zeros((reps, steps + 1), dtype=np.int64)
    for r in range(reps):
        x = 1
        out[r, 0] = 1
        for j in range(1, steps + 1):
            if np.random.random() * (2 * x) < x + 1:
                x += 1
            else:
                x -= 1
            out[r, j] = x
    return out


# ---------------------------------------------------------------- continuous walks

@njit(cache=True)
def chain_min_block(x, s, u, m, checkpoints, offset, rec):
    """Advance walks by one block of increments, tracking the running minimum of new chain values.

    Each step adds one chain value: the upward chain value if the walk lands
    above 0, else the negated downward value (u - s).  ``rec[:, j]`` receives
    the running minimum at absolute time ``checkpoints[j]`` if it falls inside
    this block.
    """
    reps, b = x.shape
    nck = checkpoints.shape[0]
    for r in range(reps):
        sr = s[r]
        ur = u[r]
        mr = m[r]
        j = 0
        while j < nck and checkpoints[j] <= offset:
            j += 1
        for i in range(b):
            xi = x[r, i]
            sr += xi
            if sr > 0:
                ur += xi
                c = ur
            else:
                c = ur - sr
            if c < mr:
                mr = c
            t = offset + i + 1
            while j < nck and checkpoints[j] == t:
                rec[r, j] = mr
                j += 1
        s[r] = sr
        u[r] = ur
        m[r] = mr


# ---------------------------------------------------------------- Brownian valley

@njit(cache=True)
def _bes3_step(r, dt):
    sd = np.sqrt(dt)
    a = r + sd * np.random.standard_normal()
    b = sd * np.random.standard_normal()
    c = sd * np.random.standard_normal()
    return np.sqrt(a * a + b * b + c * c)


@njit(cache=True)
def _heap_push_replace(heap, size, cap, v):
    """Max-heap of the ``cap`` smallest values seen; returns the new size."""
    if size < cap:
        i = size
        heap[i] = v
        size += 1
        while i > 0:
            p = (i - 1) // 2
            if heap[p] < heap[i]:
                heap[p], heap[i] = heap[i], heap[p]
                i = p
            else:
                break
        return size
    if v >= heap[0]:
        return size
    heap[0] = v
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        big = i
        if left < size and heap[left] > heap[big]:
            big = left
        if right < size and heap[right] > heap[big]:
            big = right
        if big == i:
            break
        heap[i], heap[big] = heap[big], heap[i]
        i = big
    return size


@njit(cache=True)
def _valley_arm(t0, heap, size, cap, max_steps):
    """Run one BES(3) arm on the grid t0, t0+1, ... until it provably never again goes below the cap-th value.

    Above the current threshold w the arm returns to w with probability w/r;
    the return time is a Brownian first passage (r-w)^2/Z^2, after which the
    arm restarts from w and is sampled at the next grid time.
    """
    r = np.sqrt(t0) * np.sqrt(np.random.standard_normal() ** 2 + np.random.standard_normal() ** 2
                              + np.random.standard_normal() ** 2)
    steps = 0
    truncated = False
    while True:
        size = _heap_push_replace(heap, size, cap, r)
        if size == cap and r > heap[0]:
            w = heap[0]
            if np.random.random() * r >= w:
                break
            z = np.random.standard_normal()
            tau = ((r - w) / z) ** 2
            dt = 1.0 - (tau - np.floor(tau))
            r = _bes3_step(w, dt)
        else:
            r = _bes3_step(r, 1.0)
        steps += 1
        if steps >= max_steps:
            truncated = True
            break
    return size, truncated


@njit(cache=True)
def valley_order_stats(reps, K, max_steps, seed):
    """Exact samples of the K+1 smallest values of the valley seen at a uniformly shifted unit grid."""
    np.random.seed(seed)
    cap = K + 1
    out = np.empty((reps, cap))
    us = np.empty(reps)
    flags = np.zeros(reps, dtype=np.bool_)
    heap = np.empty(cap)
    for r in range(reps):
        u = np.random.random()
        us[r] = u
        size = 0
        size, t1 = _valley_arm(u, heap, size, cap, max_steps)
        size, t2 = _valley_arm(1.0 - u, heap, size, cap, max_steps)
        flags[r] = t1 or t2
        out[r, :] = np.sort(heap[:size])
    return out, us, flags


@njit(cache=True)
def bes3_min_on_grid(reps, u, a, max_steps, seed):
    """Indicator that a BES(3) from 0 stays above a at times u, u+1, ... (exact via the return trick)."""
    np.random.seed(seed)
    out = np.zeros(reps, dtype=np.bool_)
    for rep in range(reps):
        r = np.sqrt(u) * np.sqrt(np.random.standard_normal() ** 2 + np.random.standard_normal() ** 2
                                 + np.random.standard_normal() ** 2)
        ok = True
        steps = 0
        while steps < max_steps:
            if r <= a:
                ok = False
                break
            if np.random.random() * r >= a:
                break
            z = np.random.standard_normal()
            tau = ((r - a) / z) ** 2
            dt = 1.0 - (tau - np.floor(tau))
            r = _bes3_step(a, dt)
            steps += 1
        out[rep] = ok
    return out


@njit(cache=True, parallel=True)
def chain_smallest_block(x, s, u, best, checkpoints, offset, rec):
    """Like ``chain_min_block`` but keeps the K smallest chain values (sorted) per walk.

    ``best`` has shape (reps, K); ``rec`` has shape (reps, len(checkpoints), K).
    Replicas are independent, so the parallel loop is deterministic.
    """
    reps, b = x.shape
    nck = checkpoints.shape[0]
    kk = best.shape[1]
    for r in prange(reps):
        sr = s[r]
        ur = u[r]
        j = 0
        while j < nck and checkpoints[j] <= offset:
            j += 1
        for i in range(b):
            xi = x[r, i]
            sr += xi
            if sr > 0:
                ur += xi
                c = ur
            else:
                c = ur - sr
            if c < best[r, kk - 1]:
                p = kk - 1
                while p > 0 and best[r, p - 1] > c:
                    best[r, p] = best[r, p - 1]
                    p -= 1
                best[r, p] = c
            t = offset + i + 1
            while j < nck and checkpoints[j] == t:
                for q in range(kk):
                    rec[r, j, q] = best[r, q]
                j += 1
        s[r] = sr
        u[r] = ur
