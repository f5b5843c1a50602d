"""Pure-numpy implementations of the hot kernels.

Semantics match ``_kernels.pyx`` exactly for integer outputs; float outputs
agree to rounding.
"""
import numpy as np

_CHUNK = 256


def knn_indices(queries, data, k):
    """Indices of the ``k`` nearest rows of ``data`` for each query row.

    Distances are squared Euclidean on integer token coordinates; ties keep
    the lower data index first.
    """
    queries = np.ascontiguousarray(queries, dtype=np.int64)
    data = np.ascontiguousarray(data, dtype=np.int64)
    m, n = queries.shape[0], data.shape[0]
    out = np.empty((m, k), dtype=np.int64)
    for lo in range(0, m, _CHUNK):
        q = queries[lo:lo + _CHUNK]
        d2 = np.zeros((q.shape[0], n), dtype=np.int64)
        for j in range(data.shape[1]):
            diff = q[:, j, None] - data[None, :, j]
            d2 += diff * diff
        if k < n:
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        else:
            kth = d2.max(axis=1)
        for r in range(q.shape[0]):
            cand = np.flatnonzero(d2[r] <= kth[r])
            order = np.argsort(d2[r, cand], kind="stable")
            out[lo + r] = cand[order[:k]]
    return out


def histogram2d(tokens, vocab):
    tokens = np.asarray(tokens, dtype=np.int64)
    flat = tokens[:, 0] * vocab + tokens[:, 1]
    return np.bincount(flat, minlength=vocab * vocab).reshape(vocab, vocab)


def categorical_rows(probs, u):
    """Inverse-CDF draw per row: first index whose running sum exceeds ``u * total``."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs, axis=1)
    thr = np.asarray(u, dtype=np.float64) * cdf[:, -1]
    idx = (cdf > thr[:, None]).argmax(axis=1)
    return idx.astype(np.int64)


def pair_posterior(x, src, dst, kappa, vocab):
    """Posterior over terminal tokens given states ``x`` under a paired coupling.

    Each pair is weighted by its pinned-path likelihood. For states no pair can
    reach, only the pairs with the fewest mismatching tokens are kept; the
    returned ``mismatch`` array is zero exactly when the state is reachable.
    """
    x = np.ascontiguousarray(x, dtype=np.int64)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    kappa = np.asarray(kappa, dtype=np.float64)
    b, n = x.shape
    post = np.zeros((b, n, vocab), dtype=np.float64)
    mismatch = np.zeros(b, dtype=np.int64)
    for lo in range(0, b, _CHUNK):
        xs = x[lo:lo + _CHUNK]
        kap = kappa[lo:lo + _CHUNK, None, None]
        fac = ((1.0 - kap) * (xs[:, None, :] == src[None]) +
               kap * (xs[:, None, :] == dst[None]))
        zeros = (fac == 0.0).sum(axis=2)
        lik = np.where(fac > 0.0, fac, 1.0).prod(axis=2)
        zmin = zeros.min(axis=1)
        w = np.where(zeros == zmin[:, None], lik, 0.0)
        w /= w.sum(axis=1, keepdims=True)
        for i in range(n):
            onehot = np.zeros((src.shape[0], vocab))
            onehot[np.arange(src.shape[0]), dst[:, i]] = 1.0
            post[lo:lo + xs.shape[0], i] = w @ onehot
        mismatch[lo:lo + xs.shape[0]] = zmin
    return post, mismatch
