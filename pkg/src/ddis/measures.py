"""Set-to-set similarity measures built on nearest-neighbor fields.

Conventions used throughout:

* ``P`` is the template point set (size N), ``Q`` the target/window set (size M).
* Nearest neighbors are taken in appearance space with the Euclidean metric;
  among equidistant candidates the lowest index wins.
* Every score is normalized by ``1 / min(M, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ._kernels import as_points, brute_nn, sq_dist_matrix
from .errors import InputError


@dataclass(frozen=True)
class PointSet:
    """Ordered points with appearance vectors and optional locations.

    ``appearance`` has shape (n, d). ``locations`` is either None or an (n, k)
    array of coordinates (k = 2 for images, 1 in the 1-D simulations).
    """

    appearance: np.ndarray
    locations: Optional[np.ndarray] = None

    def __post_init__(self):
        app = as_points(self.appearance)
        if app.shape[0] == 0:
            raise InputError("point set must be nonempty")
        object.__setattr__(self, "appearance", app)
        if self.locations is not None:
            loc = as_points(self.locations)
            if loc.shape[0] != app.shape[0]:
                raise InputError(
                    f"{loc.shape[0]} locations given for {app.shape[0]} points"
                )
            object.__setattr__(self, "locations", loc)

    def __len__(self):
        return self.appearance.shape[0]

    @property
    def d(self) -> int:
        return self.appearance.shape[1]


SetLike = Union[PointSet, np.ndarray, list]


def _as_set(x: SetLike) -> PointSet:
    return x if isinstance(x, PointSet) else PointSet(x)


def _check_dims(a: PointSet, b: PointSet):
    if a.d != b.d:
        raise InputError(f"dimension mismatch: {a.d} vs {b.d}")


def exact_nn(query, P: SetLike) -> tuple[int, float]:
    """Index of and Euclidean distance to the appearance-NN of ``query`` in ``P``."""
    P = _as_set(P)
    q = np.atleast_1d(np.asarray(query, dtype=np.float64))
    if q.ndim != 1 or q.shape[0] != P.d:
        raise InputError(f"query has dimension {q.shape[-1]}, set has {P.d}")
    idx, d2 = brute_nn(q[None, :], P.appearance)
    return int(idx[0]), float(np.sqrt(d2[0]))


def nn_field(Q: SetLike, P: SetLike) -> tuple[np.ndarray, np.ndarray]:
    """Appearance-NN of every point of ``Q`` in ``P``: (indices, distances)."""
    Q, P = _as_set(Q), _as_set(P)
    _check_dims(Q, P)
    idx, d2 = brute_nn(Q.appearance, P.appearance)
    return idx, np.sqrt(d2)


def kappa(Q: SetLike, P: SetLike) -> np.ndarray:
    """Per template point, how many points of ``Q`` pick it as their NN."""
    P = _as_set(P)
    idx, _ = nn_field(Q, P)
    return np.bincount(idx, minlength=len(P))


def bbs(P: SetLike, Q: SetLike) -> float:
    """Best-Buddies Similarity: normalized count of mutual-NN pairs."""
    P, Q = _as_set(P), _as_set(Q)
    _check_dims(P, Q)
    d2 = sq_dist_matrix(P.appearance, Q.appearance)
    nn_of_p = np.argmin(d2, axis=1)  # into Q
    nn_of_q = np.argmin(d2, axis=0)  # into P
    pairs = int(np.count_nonzero(nn_of_q[nn_of_p] == np.arange(len(P))))
    return pairs / min(len(P), len(Q))


def dis(Q: SetLike, P: SetLike) -> float:
    """Diversity Similarity Q->P: normalized number of distinct NNs in ``P``."""
    Q, P = _as_set(Q), _as_set(P)
    idx, _ = nn_field(Q, P)
    return np.unique(idx).size / min(len(P), len(Q))


def ddis(Q: SetLike, P: SetLike) -> float:
    """Deformable Diversity Similarity Q->P.

    Each target point contributes ``exp(1 - kappa(nn)) / (r + 1)`` where ``r`` is
    the location distance to its appearance-NN. When either set lacks
    locations every ``r`` is taken as zero.
    """
    Q, P = _as_set(Q), _as_set(P)
    idx, _ = nn_field(Q, P)
    counts = np.bincount(idx, minlength=len(P))
    if Q.locations is None or P.locations is None:
        r = np.zeros(len(Q))
    else:
        if Q.locations.shape[1] != P.locations.shape[1]:
            raise InputError("location dimensions differ")
        r = np.sqrt(((Q.locations - P.locations[idx]) ** 2).sum(axis=1))
    terms = np.exp(1.0 - counts[idx]) / (r + 1.0)
    return float(terms.sum()) / min(len(P), len(Q))
