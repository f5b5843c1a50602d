# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_fallback.py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def knn_indices(queries, data, Py_ssize_t k):
    cdef const long long[:, ::1] q = np.ascontiguousarray(queries, dtype=np.int64)
    cdef const long long[:, ::1] d = np.ascontiguousarray(data, dtype=np.int64)
    cdef Py_ssize_t m = q.shape[0], n = d.shape[0], dim = q.shape[1]
    out_arr = np.empty((m, k), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    best_arr = np.empty(k, dtype=np.int64)
    cdef long long[::1] best = best_arr
    cdef Py_ssize_t r, j, c, pos, filled
    cdef long long dist, diff
    with nogil:
        for r in range(m):
            filled = 0
            for j in range(n):
                dist = 0
                for c in range(dim):
                    diff = q[r, c] - d[j, c]
                    dist = dist + diff * diff
                if filled == k and dist >= best[k - 1]:
                    continue
                # stable insertion: equal distances stay behind earlier indices
                pos = filled if filled < k else k - 1
                while pos > 0 and best[pos - 1] > dist:
                    if pos < k:
                        best[pos] = best[pos - 1]
                        out[r, pos] = out[r, pos - 1]
                    pos -= 1
                best[pos] = dist
                out[r, pos] = j
                if filled < k:
                    filled += 1
    return out_arr


def histogram2d(tokens, Py_ssize_t vocab):
    cdef const long long[:, ::1] t = np.ascontiguousarray(tokens, dtype=np.int64)
    out_arr = np.zeros((vocab, vocab), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef Py_ssize_t r
    with nogil:
        for r in range(t.shape[0]):
            out[t[r, 0], t[r, 1]] += 1
    return out_arr


def categorical_rows(probs, u):
    cdef const double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t rows = p.shape[0], v = p.shape[1], r, j
    out_arr = np.empty(rows, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef double total, thr, acc
    with nogil:
        for r in range(rows):
            total = 0.0
            for j in range(v):
                total = total + p[r, j]
            thr = uu[r] * total
            acc = 0.0
            out[r] = 0
            for j in range(v):
                acc = acc + p[r, j]
                if acc > thr:
                    out[r] = j
                    break
    return out_arr


def pair_posterior(x, src, dst, kappa, Py_ssize_t vocab):
    cdef const long long[:, ::1] xs = np.ascontiguousarray(x, dtype=np.int64)
    cdef const long long[:, ::1] s = np.ascontiguousarray(src, dtype=np.int64)
    cdef const long long[:, ::1] e = np.ascontiguousarray(dst, dtype=np.int64)
    cdef const double[::1] kap = np.ascontiguousarray(kappa, dtype=np.float64)
    cdef Py_ssize_t b = xs.shape[0], n = xs.shape[1], npairs = s.shape[0]
    post_arr = np.zeros((b, n, vocab), dtype=np.float64)
    cdef double[:, :, ::1] post = post_arr
    mismatch_arr = np.zeros(b, dtype=np.int64)
    cdef long long[::1] mismatch = mismatch_arr
    w_arr = np.empty(npairs, dtype=np.float64)
    z_arr = np.empty(npairs, dtype=np.int64)
    cdef double[::1] w = w_arr
    cdef long long[::1] z = z_arr
    cdef Py_ssize_t r, p, i
    cdef long long zmin
    cdef double k, lik, f, total
    with nogil:
        for r in range(b):
            k = kap[r]
            zmin = n + 1
            for p in range(npairs):
                lik = 1.0
                z[p] = 0
                for i in range(n):
                    f = 0.0
                    if xs[r, i] == s[p, i]:
                        f = f + (1.0 - k)
                    if xs[r, i] == e[p, i]:
                        f = f + k
                    if f == 0.0:
                        z[p] += 1
                    else:
                        lik = lik * f
                w[p] = lik
                if z[p] < zmin:
                    zmin = z[p]
            total = 0.0
            for p in range(npairs):
                if z[p] == zmin:
                    total = total + w[p]
            for p in range(npairs):
                if z[p] == zmin:
                    for i in range(n):
                        post[r, i, e[p, i]] += w[p] / total
            mismatch[r] = zmin
    return post_arr, mismatch_arr
