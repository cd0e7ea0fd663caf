"""Compiled inner loops shared by every module that needs nearest neighbors.

All squared distances in the package go through ``sq_dist`` so that exact
search, the kd-tree and the reference measures agree bit for bit, which keeps
tie-breaking identical across code paths.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True, inline="always")
def sq_dist(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        t = a[k] - b[k]
        acc += t * t
    return acc


@nb.njit(cache=True, nogil=True)
def sq_dist_matrix(A, B):
    n, m = A.shape[0], B.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = sq_dist(A[i], B[j])
    return out


@nb.njit(cache=True, nogil=True)
def brute_nn(queries, points):
    """Exact NN of each query row among ``points``; lowest index wins ties."""
    n = queries.shape[0]
    idx = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n)
    for i in range(n):
        best = np.inf
        bi = -1
        for j in range(points.shape[0]):
            d = sq_dist(queries[i], points[j])
            if d < best:
                best = d
                bi = j
        idx[i] = bi
        dist2[i] = best
    return idx, dist2


def as_points(x):
    """Coerce to a C-contiguous float64 (n, d) array; 1-D input is n points of d=1."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D point array, got shape {a.shape}")
    return np.ascontiguousarray(a)
