"""PCA-reduced, epsilon-approximate kd-tree search over template descriptors.

The tree answers queries with the usual multiplicative guarantee: the returned
point is at most ``(1 + epsilon)`` times farther than the true nearest neighbor
in the reduced space. With ``epsilon = 0`` the search is exact and ties go to
the lowest template index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numba as nb
import numpy as np

from ._kernels import as_points, sq_dist
from .errors import InputError

LEAF_SIZE = 8


@dataclass(frozen=True)
class AnnParams:
    epsilon: float = 2.0
    reduced_dim: int = 9
    propagation: bool = False
    projection: Literal["pca", "identity"] = "pca"

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InputError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.reduced_dim < 1:
            raise InputError(f"reduced_dim must be >= 1, got {self.reduced_dim}")
        if self.projection not in ("pca", "identity"):
            raise InputError(f"unknown projection {self.projection!r}")


@dataclass(frozen=True)
class PcaProjection:
    mean: np.ndarray
    basis: np.ndarray  # (d', d), orthonormal rows

    @property
    def reduced_dim(self) -> int:
        return self.basis.shape[0]

    @classmethod
    def identity(cls, d: int) -> "PcaProjection":
        return cls(np.zeros(d), np.eye(d))

    def is_identity(self) -> bool:
        b = self.basis
        return b.shape[0] == b.shape[1] and not self.mean.any() and np.array_equal(b, np.eye(b.shape[0]))

    def project(self, x) -> np.ndarray:
        x = as_points(x)
        if x.shape[1] != self.mean.shape[0]:
            raise InputError(f"feature dimension {x.shape[1]} != {self.mean.shape[0]}")
        if self.is_identity():
            return x.copy()
        return np.ascontiguousarray((x - self.mean) @ self.basis.T)


def fit_pca(samples, n_components: int) -> PcaProjection:
    """Top principal directions of ``samples`` by descending variance.

    Each basis row is sign-flipped so its largest-magnitude entry is >= 0,
    making the result deterministic.
    """
    X = as_points(samples)
    n, d = X.shape
    if n < 2:
        raise InputError("PCA needs at least 2 samples")
    if not 1 <= n_components <= d:
        raise InputError(f"n_components must be in [1, {d}], got {n_components}")
    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X - mean, rowvar=False))
    w, v = np.linalg.eigh(cov)
    order = np.argsort(w, kind="stable")[::-1][:n_components]
    basis = v[:, order].T.copy()
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return PcaProjection(mean, basis)


# ---------------------------------------------------------------- kd-tree


def _build_tree(points: np.ndarray):
    """Median-split tree. Returns node arrays plus the leaf permutation."""
    n = points.shape[0]
    perm = np.arange(n)
    dims, vals, left, right, start, end = [], [], [], [], [], []

    def new_node():
        for lst, v in ((dims, -1), (vals, 0.0), (left, -1), (right, -1), (start, 0), (end, 0)):
            lst.append(v)
        return len(dims) - 1

    root = new_node()
    todo = [(root, 0, n)]
    while todo:
        node, lo, hi = todo.pop()
        if hi - lo <= LEAF_SIZE:
            start[node], end[node] = lo, hi
            continue
        sub = points[perm[lo:hi]]
        spread = sub.max(axis=0) - sub.min(axis=0)
        dim = int(np.argmax(spread))
        if spread[dim] == 0:
            start[node], end[node] = lo, hi
            continue
        mid = (hi - lo) // 2
        order = np.argsort(sub[:, dim], kind="stable")
        perm[lo:hi] = perm[lo:hi][order]
        val = points[perm[lo + mid], dim]
        dims[node], vals[node] = dim, float(val)
        l, r = new_node(), new_node()
        left[node], right[node] = l, r
        todo.append((l, lo, lo + mid))
        todo.append((r, lo + mid, hi))
    return (
        np.array(dims, dtype=np.int64),
        np.array(vals),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(start, dtype=np.int64),
        np.array(end, dtype=np.int64),
        perm,
    )


@nb.njit(cache=True, nogil=True)
def _search(q, pts, labels, dims, vals, left, right, start, end, perm, scale2, best2, best, stack, bounds):
    # stack-based descent; near child popped first, far child keeps its plane bound
    top = 0
    stack[0] = 0
    bounds[0] = 0.0
    while top >= 0:
        node = stack[top]
        lb = bounds[top]
        top -= 1
        if lb * scale2 > best2:
            continue
        if left[node] < 0:
            for k in range(start[node], end[node]):
                j = perm[k]
                d = sq_dist(q, pts[j])
                if d < best2 or (d == best2 and labels[j] < best):
                    best2 = d
                    best = labels[j]
            continue
        diff = q[dims[node]] - vals[node]
        if diff < 0:
            near, far = left[node], right[node]
        else:
            near, far = right[node], left[node]
        top += 1
        stack[top] = far
        bounds[top] = diff * diff
        top += 1
        stack[top] = near
        bounds[top] = lb
    return best, best2


@nb.njit(cache=True, nogil=True)
def _query_batch(queries, seeds, pts, labels, all_pts, dims, vals, left, right, start, end, perm, eps):
    n = queries.shape[0]
    out = np.empty(n, dtype=np.int64)
    out2 = np.empty(n)
    stack = np.empty(dims.shape[0] + 1, dtype=np.int64)
    bounds = np.empty(dims.shape[0] + 1)
    scale2 = (1.0 + eps) * (1.0 + eps)
    for i in range(n):
        best = -1
        best2 = np.inf
        s = seeds[i]
        if s >= 0:
            best = s
            best2 = sq_dist(queries[i], all_pts[s])
        b, b2 = _search(queries[i], pts, labels, dims, vals, left, right, start, end, perm,
                        scale2, best2, best, stack, bounds)
        out[i] = b
        out2[i] = b2
    return out, out2


@nb.njit(cache=True, nogil=True)
def _query_propagate(queries, height, width, tw, th, pts, labels, all_pts,
                     dims, vals, left, right, start, end, perm, eps):
    """Row-major sweep seeding each query with its left (or top) neighbor's match.

    The seed is the neighbor's template match shifted by one cell in the sweep
    direction when that stays inside the template, otherwise the match itself.
    """
    n = height * width
    out = np.empty(n, dtype=np.int64)
    out2 = np.empty(n)
    stack = np.empty(dims.shape[0] + 1, dtype=np.int64)
    bounds = np.empty(dims.shape[0] + 1)
    scale2 = (1.0 + eps) * (1.0 + eps)
    for y in range(height):
        for x in range(width):
            i = y * width + x
            best = -1
            best2 = np.inf
            if x > 0 or y > 0:
                if x > 0:
                    m = out[i - 1]
                    s = m + 1 if (m % tw) + 1 < tw else m
                else:
                    m = out[i - width]
                    s = m + tw if (m // tw) + 1 < th else m
                best = s
                best2 = sq_dist(queries[i], all_pts[s])
            b, b2 = _search(queries[i], pts, labels, dims, vals, left, right, start, end, perm,
                            scale2, best2, best, stack, bounds)
            out[i] = b
            out2[i] = b2
    return out, out2


class AnnIndex:
    """kd-tree over the projected template descriptors.

    Entry ``i`` of the index is template point ``i``; exact duplicates in the
    reduced space collapse onto their lowest index.
    """

    def __init__(self, features, locations=None, params: AnnParams = AnnParams()):
        X = as_points(features)
        if X.shape[0] == 0:
            raise InputError("cannot index an empty template")
        self.params = params
        self.d = X.shape[1]
        if params.projection == "identity":
            self.projection = PcaProjection.identity(self.d)
        else:
            k = min(params.reduced_dim, self.d)
            if X.shape[0] < 2:
                self.projection = PcaProjection(X[0].copy(), np.eye(self.d)[:k])
            else:
                self.projection = fit_pca(X, k)
        self.reduced = self.projection.project(X)
        self.locations = None if locations is None else np.asarray(locations, dtype=np.float64)
        _, first = np.unique(self.reduced, axis=0, return_index=True)
        first.sort()
        self._labels = first.astype(np.int64)
        self._pts = np.ascontiguousarray(self.reduced[first])
        self._tree = _build_tree(self._pts)

    def __len__(self):
        return self.reduced.shape[0]

    def _args(self):
        return (self._pts, self._labels, self.reduced) + self._tree + (float(self.params.epsilon),)

    def query(self, feature, seed: Optional[int] = None) -> tuple[int, float]:
        """Approximate NN of one descriptor: (template index, reduced-space distance)."""
        f = np.asarray(feature, dtype=np.float64)
        if f.ndim != 1 or f.shape[0] != self.d:
            raise InputError(f"query has dimension {f.shape}, index expects {self.d}")
        idx, d2 = self.query_many(f[None, :], None if seed is None else np.array([seed]))
        return int(idx[0]), float(np.sqrt(d2[0]))

    def query_many(self, features, seeds=None):
        """Batch query; returns (indices, squared reduced-space distances)."""
        q = self.projection.project(features)
        if seeds is None:
            seeds = np.full(q.shape[0], -1, dtype=np.int64)
        else:
            seeds = np.asarray(seeds, dtype=np.int64)
            if seeds.shape != (q.shape[0],) or (seeds >= len(self)).any():
                raise InputError("seeds must be one template index (or -1) per query")
        pts, labels, allp, *tree, eps = self._args()
        return _query_batch(q, seeds, pts, labels, allp, *tree, eps)

    def query_grid(self, features, height: int, width: int, template_shape: tuple[int, int]):
        """Row-major sweep over a target grid with one-step propagation seeding.

        ``template_shape`` is (height, width) of the template grid the index was
        built from; point ``i`` is taken to sit at (i % tw, i // tw).
        """
        th, tw = template_shape
        if th * tw != len(self):
            raise InputError("template shape does not match index size")
        q = self.projection.project(features)
        pts, labels, allp, *tree, eps = self._args()
        return _query_propagate(q, height, width, tw, th, pts, labels, allp, *tree, eps)


def build_index(features, locations=None, params: AnnParams = AnnParams()) -> AnnIndex:
    return AnnIndex(features, locations, params)


def query(index: AnnIndex, feature, seed: Optional[int] = None) -> tuple[int, float]:
    return index.query(feature, seed)
