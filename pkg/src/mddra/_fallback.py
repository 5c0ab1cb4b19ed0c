"""Pure-Python/numpy versions of the hot kernels.

Every function here has a twin in ``_core.pyx`` and both must return
bit-identical results. Arithmetic is therefore written element-wise in a
fixed order; no reductions whose summation order numpy is free to change.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def sliding_mean(x, window):
    """Mean of the trailing ``window`` values at every position.

    Positions with fewer than ``window`` predecessors average over what is
    available. Each window is summed oldest-first starting from 0.0.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    acc = np.zeros(n, dtype=np.float64)
    count = np.zeros(n, dtype=np.float64)
    for lag in range(min(window, n) - 1, -1, -1):
        acc[lag:] += x[: n - lag]
        count[lag:] += 1.0
    return acc / count


def _segment_cost(p1, p2, s, j):
    # cost of the segment [s, j) from centred prefix sums
    d1 = p1[j] - p1[s]
    d = (p2[j] - p2[s]) - d1 * d1 / (j - s)
    return d if d > 0.0 else 0.0


def _first_within(vals, tol):
    # first candidate whose value is within tol of the minimum
    return int(np.argmax(vals <= vals.min() + tol))


def _layer(p1, p2, prev, cur, opt, n, r, tol):
    """Fill ``cur[s]`` for s in [0, n - r] by divide and conquer.

    The recursion tree is walked one depth at a time so that every node at a
    depth is evaluated in a single vectorised pass over a ragged candidate list.
    """
    s_lo = np.array([0], dtype=np.int64)
    s_hi = np.array([n - r], dtype=np.int64)
    j_lo = np.array([1], dtype=np.int64)
    j_hi = np.array([n - r + 1], dtype=np.int64)
    while s_lo.size:
        live = s_lo <= s_hi
        s_lo, s_hi, j_lo, j_hi = s_lo[live], s_hi[live], j_lo[live], j_hi[live]
        if not s_lo.size:
            break
        s = (s_lo + s_hi) // 2
        lo = np.maximum(s + 1, j_lo)
        hi = np.minimum(n - r + 1, j_hi)
        counts = hi - lo + 1
        starts = np.zeros(counts.size, dtype=np.int64)
        np.cumsum(counts[:-1], out=starts[1:])
        node = np.repeat(np.arange(counts.size), counts)
        js = lo[node] + (np.arange(node.size) - starts[node])
        ss = s[node]
        d1 = p1[js] - p1[ss]
        d = (p2[js] - p2[ss]) - d1 * d1 / (js - ss).astype(np.float64)
        d = np.where(d > 0.0, d, 0.0)
        vals = d + prev[js]
        within = vals <= (np.minimum.reduceat(vals, starts) + tol)[node]
        hits = np.flatnonzero(within)
        first = hits[np.unique(node[hits], return_index=True)[1]]
        cur[s] = vals[first]
        best = js[first]
        opt[s] = best
        s_lo, s_hi, j_lo, j_hi = (
            np.concatenate((s_lo, s + 1)),
            np.concatenate((s - 1, s_hi)),
            np.concatenate((j_lo, best)),
            np.concatenate((best, j_hi)),
        )


def partition_dp(p1, p2, k, tol=0.0):
    """Optimal contiguous k-partition start indices (0-based).

    ``p1``/``p2`` are prefix sums (length n + 1) of the centred values and
    their squares. Solves the suffix recursion so that forward
    reconstruction yields the lexicographically smallest optimal boundaries.
    Candidates within ``tol`` of a minimum count as tied, so rounding noise
    in the prefix-sum costs cannot break a genuine tie.
    """
    p1 = np.ascontiguousarray(p1, dtype=np.float64)
    p2 = np.ascontiguousarray(p2, dtype=np.float64)
    n = p1.shape[0] - 1
    prev = np.empty(n + 1, dtype=np.float64)
    for s in range(n):
        prev[s] = _segment_cost(p1, p2, s, n)
    prev[n] = np.inf
    opts = []
    for r in range(2, k + 1):
        cur = np.full(n + 1, np.inf)
        opt = np.zeros(n + 1, dtype=np.int64)
        if r == k:
            # only the full series is needed for the last layer
            js = np.arange(1, n - r + 2)
            d1 = p1[js] - p1[0]
            d = (p2[js] - p2[0]) - d1 * d1 / js.astype(np.float64)
            d = np.where(d > 0.0, d, 0.0)
            vals = d + prev[js]
            best = _first_within(vals, tol)
            cur[0] = vals[best]
            opt[0] = 1 + best
        else:
            _layer(p1, p2, prev, cur, opt, n, r, tol)
        opts.append(opt)
        prev = cur
    starts = [0]
    s = 0
    for opt in reversed(opts):
        s = int(opt[s])
        starts.append(s)
    return np.asarray(starts, dtype=np.int64)


def gini_best_split(X, y, idx, features, n_classes, min_leaf):
    """Best Gini split of the rows ``idx`` over the candidate ``features``.

    Returns ``(feature, threshold, criterion)``; feature is -1 when no split
    leaves ``min_leaf`` rows on both sides. The criterion is the weighted
    Gini impurity times the node size. Ties go to the earlier feature and,
    within a feature, to the lower threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    idx = np.asarray(idx, dtype=np.int64)
    m = idx.shape[0]
    best_f, best_thr, best_crit = -1, 0.0, np.inf
    if m < 2 * min_leaf or m < 2:
        return best_f, best_thr, best_crit
    labels = y[idx]
    onehot = np.zeros((m, n_classes), dtype=np.float64)
    total = np.zeros(n_classes, dtype=np.float64)
    for c in range(n_classes):
        total[c] = float(np.count_nonzero(labels == c))
    left_n = np.arange(1, m, dtype=np.float64)
    right_n = m - left_n
    pos = np.arange(m - 1)
    size_ok = (pos + 1 >= min_leaf) & (m - (pos + 1) >= min_leaf)
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        onehot[:] = 0.0
        onehot[np.arange(m), labels[order]] = 1.0
        cl = np.cumsum(onehot, axis=0)[:-1]
        sq_l = np.zeros(m - 1)
        sq_r = np.zeros(m - 1)
        for c in range(n_classes):
            a = cl[:, c]
            b = total[c] - a
            sq_l = sq_l + a * a
            sq_r = sq_r + b * b
        crit = (left_n - sq_l / left_n) + (right_n - sq_r / right_n)
        valid = size_ok & (sv[:-1] < sv[1:])
        if not valid.any():
            continue
        crit = np.where(valid, crit, np.inf)
        i = int(np.argmin(crit))
        if crit[i] < best_crit:
            best_crit = float(crit[i])
            best_f = int(f)
            thr = (sv[i] + sv[i + 1]) / 2.0
            if thr >= sv[i + 1]:
                thr = sv[i]
            best_thr = float(thr)
    return best_f, best_thr, best_crit


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK64


def xoshiro256ss(state, n):
    """Advance a xoshiro256** state ``n`` times.

    Returns ``(outputs, new_state)`` with ``outputs`` a uint64 array.
    """
    s0, s1, s2, s3 = (int(v) for v in state)
    out = [0] * n
    for i in range(n):
        out[i] = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
    return np.array(out, dtype=np.uint64), np.array([s0, s1, s2, s3], dtype=np.uint64)
