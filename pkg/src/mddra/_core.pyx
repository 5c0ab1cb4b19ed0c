# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_fallback`` exactly; see that module."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport INFINITY

cnp.import_array()


def sliding_mean(x, Py_ssize_t window):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, start
    cdef double acc
    for i in range(n):
        start = i - window + 1
        if start < 0:
            start = 0
        acc = 0.0
        for j in range(start, i + 1):
            acc += xv[j]
        ov[i] = acc / <double>(i - start + 1)
    return out


cdef inline double _cost(const double[::1] p1, const double[::1] p2,
                         Py_ssize_t s, Py_ssize_t j) nogil:
    cdef double d1 = p1[j] - p1[s]
    cdef double d = (p2[j] - p2[s]) - d1 * d1 / <double>(j - s)
    return d if d > 0.0 else 0.0


cdef Py_ssize_t _first_within(const double[::1] p1, const double[::1] p2,
                              double[::1] prev, Py_ssize_t s, Py_ssize_t lo,
                              Py_ssize_t hi, double tol, double* out) nogil:
    # first j in [lo, hi] whose value is within tol of the minimum
    cdef Py_ssize_t j
    cdef double v, best = INFINITY
    for j in range(lo, hi + 1):
        v = _cost(p1, p2, s, j) + prev[j]
        if v < best:
            best = v
    best = best + tol
    for j in range(lo, hi + 1):
        v = _cost(p1, p2, s, j) + prev[j]
        if v <= best:
            out[0] = v
            return j
    out[0] = INFINITY
    return lo


cdef void _layer(const double[::1] p1, const double[::1] p2,
                 double[::1] prev, double[::1] cur, int64_t[::1] opt,
                 Py_ssize_t s_lo, Py_ssize_t s_hi,
                 Py_ssize_t j_lo, Py_ssize_t j_hi,
                 Py_ssize_t n, Py_ssize_t r, double tol) nogil:
    cdef Py_ssize_t s, lo, hi, best_j
    cdef double best
    if s_lo > s_hi:
        return
    s = (s_lo + s_hi) // 2
    lo = s + 1 if s + 1 > j_lo else j_lo
    hi = n - r + 1 if n - r + 1 < j_hi else j_hi
    best_j = _first_within(p1, p2, prev, s, lo, hi, tol, &best)
    cur[s] = best
    opt[s] = best_j
    _layer(p1, p2, prev, cur, opt, s_lo, s - 1, j_lo, best_j, n, r, tol)
    _layer(p1, p2, prev, cur, opt, s + 1, s_hi, best_j, j_hi, n, r, tol)


def partition_dp(p1, p2, Py_ssize_t k, double tol=0.0):
    cdef const double[::1] a = np.ascontiguousarray(p1, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(p2, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0] - 1
    cdef Py_ssize_t s, j, r, best_j
    cdef double v, best
    prev_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] prev = prev_arr
    for s in range(n):
        prev[s] = _cost(a, b, s, n)
    prev[n] = INFINITY
    opts = []
    cdef double[::1] cur
    cdef int64_t[::1] opt
    for r in range(2, k + 1):
        cur_arr = np.full(n + 1, np.inf)
        opt_arr = np.zeros(n + 1, dtype=np.int64)
        cur = cur_arr
        opt = opt_arr
        if r == k:
            best_j = _first_within(a, b, prev, 0, 1, n - r + 1, tol, &best)
            cur[0] = best
            opt[0] = best_j
        else:
            with nogil:
                _layer(a, b, prev, cur, opt, 0, n - r, 1, n - r + 1, n, r, tol)
        opts.append(opt_arr)
        prev = cur
    starts = [0]
    s = 0
    for opt_arr in reversed(opts):
        s = int(opt_arr[s])
        starts.append(s)
    return np.asarray(starts, dtype=np.int64)


def gini_best_split(X, y, idx, features, Py_ssize_t n_classes, Py_ssize_t min_leaf):
    cdef const double[:, :] xv = np.asarray(X, dtype=np.float64)
    cdef const int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    idx_arr = np.ascontiguousarray(idx, dtype=np.int64)
    cdef const int64_t[::1] iv = idx_arr
    cdef Py_ssize_t m = iv.shape[0]
    cdef Py_ssize_t best_f = -1
    cdef double best_thr = 0.0, best_crit = INFINITY
    if m < 2 * min_leaf or m < 2:
        return best_f, best_thr, best_crit
    total_arr = np.zeros(n_classes, dtype=np.float64)
    left_arr = np.zeros(n_classes, dtype=np.float64)
    sv_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] total = total_arr
    cdef double[::1] left = left_arr
    cdef double[::1] sv = sv_arr
    cdef const int64_t[::1] order
    cdef Py_ssize_t i, c, f, fi, row, bi
    cdef double ln, rn, sq_l, sq_r, b, crit, fbest, thr
    for i in range(m):
        total[yv[iv[i]]] += 1.0
    for f in features:
        for i in range(m):
            sv[i] = xv[iv[i], f]
        order_arr = np.argsort(sv_arr, kind="stable")
        order = order_arr
        sorted_vals = sv_arr[order_arr]
        for c in range(n_classes):
            left[c] = 0.0
        fbest = INFINITY
        bi = -1
        for i in range(m - 1):
            row = iv[order[i]]
            left[yv[row]] += 1.0
            if i + 1 < min_leaf or m - (i + 1) < min_leaf:
                continue
            if not (xv[row, f] < xv[iv[order[i + 1]], f]):
                continue
            ln = <double>(i + 1)
            rn = <double>m - ln
            sq_l = 0.0
            sq_r = 0.0
            for c in range(n_classes):
                b = total[c] - left[c]
                sq_l = sq_l + left[c] * left[c]
                sq_r = sq_r + b * b
            crit = (ln - sq_l / ln) + (rn - sq_r / rn)
            if crit < fbest:
                fbest = crit
                bi = i
        if bi >= 0 and fbest < best_crit:
            best_crit = fbest
            best_f = f
            thr = (sorted_vals[bi] + sorted_vals[bi + 1]) / 2.0
            if thr >= sorted_vals[bi + 1]:
                thr = sorted_vals[bi]
            best_thr = thr
    return int(best_f), float(best_thr), float(best_crit)


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


def xoshiro256ss(state, Py_ssize_t n):
    st = np.array(state, dtype=np.uint64)
    cdef uint64_t[::1] sv = st
    cdef uint64_t s0 = sv[0], s1 = sv[1], s2 = sv[2], s3 = sv[3], t
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _rotl(s1 * 5, 7) * 9
            t = s1 << 17
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = _rotl(s3, 45)
    return out, np.array([s0, s1, s2, s3], dtype=np.uint64)
