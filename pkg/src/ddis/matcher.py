"""Sliding-window template matching over a precomputed nearest-neighbor grid.

The target grid is searched once per cell (never per window); every window
score is then derived from that single NN field. DDIS and DIS windows share
a per-template-cell count table that is rebuilt at the start of each row and
slid one column at a time within the row.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numba as nb
import numpy as np

from ._kernels import brute_nn, sq_dist, sq_dist_matrix
from .ann import AnnParams, build_index
from .errors import InputError, SizeGuardError
from .features import FeatureGrid, PatchSpec, extract_patch_features

MEASURES = ("ddis", "dis", "bbs", "ssd", "sad", "ncc")
DEFAULT_BBS_GUARD = 128 * 128


@dataclass(frozen=True)
class NNGrid:
    """Per target cell: template index of its appearance-NN, that cell's
    (x, y) template coordinates, and the full-dimension appearance distance."""

    nn_index: np.ndarray  # (h, w) int64
    nn_location: np.ndarray  # (h, w, 2) float64, (x, y)
    distance: np.ndarray  # (h, w)
    template_shape: tuple[int, int]  # (th, tw)

    @property
    def height(self) -> int:
        return self.nn_index.shape[0]

    @property
    def width(self) -> int:
        return self.nn_index.shape[1]


@dataclass(frozen=True)
class MatchResult:
    rect: tuple[int, int, int, int]  # x, y, w, h in image pixels
    raw_score: float
    smoothed_score: float


@dataclass(frozen=True)
class MatcherConfig:
    measure: str = "ddis"
    ann: Optional[AnnParams] = field(default_factory=AnnParams)  # None -> exact search
    smoothing: bool = True
    bbs_guard: int = DEFAULT_BBS_GUARD  # max target cells for windowed BBS
    patch: PatchSpec = field(default_factory=PatchSpec)
    workers: int = 1

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise InputError(f"unknown measure {self.measure!r}; choose from {', '.join(MEASURES)}")
        if self.workers < 1:
            raise InputError("workers must be >= 1")


def _row_chunks(n: int, workers: int):
    k = max(1, min(workers, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_rows(fn, n: int, workers: int):
    """Apply ``fn(y0, y1)`` over row chunks and return results in chunk order."""
    chunks = _row_chunks(n, workers)
    if len(chunks) == 1:
        return [fn(*chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
        return list(ex.map(lambda c: fn(*c), chunks))


def _check_pair(target: FeatureGrid, template: FeatureGrid):
    if target.d != template.d:
        raise InputError(f"descriptor dimension mismatch: target {target.d}, template {template.d}")
    if template.height > target.height or template.width > target.width:
        raise InputError(
            f"template grid {template.width}x{template.height} larger than "
            f"target grid {target.width}x{target.height}"
        )


@nb.njit(cache=True, nogil=True)
def _paired_sq_dist(A, B, idx):
    out = np.empty(A.shape[0])
    for i in range(A.shape[0]):
        out[i] = sq_dist(A[i], B[idx[i]])
    return out


def compute_nn_grid(target: FeatureGrid, template: FeatureGrid, ann: Optional[AnnParams] = None,
                    workers: int = 1) -> NNGrid:
    """One appearance-NN lookup per target cell, exact (``ann=None``) or approximate."""
    _check_pair(target, template)
    th, tw = template.height, template.width
    h, w = target.height, target.width
    tpts = template.points()
    qpts = target.points()

    if ann is None:
        def rows(y0, y1):
            return brute_nn(qpts[y0 * w:y1 * w], tpts)
        parts = _run_rows(rows, h, workers)
        idx = np.concatenate([p[0] for p in parts])
        d2 = np.concatenate([p[1] for p in parts])
    else:
        index = build_index(tpts, params=ann)
        if ann.propagation:
            idx, _ = index.query_grid(qpts, h, w, (th, tw))
        else:
            parts = _run_rows(lambda y0, y1: index.query_many(qpts[y0 * w:y1 * w]), h, workers)
            idx = np.concatenate([p[0] for p in parts])
        d2 = _paired_sq_dist(qpts, tpts, idx)

    idx = idx.reshape(h, w)
    loc = np.stack([idx % tw, idx // tw], axis=-1).astype(np.float64)
    return NNGrid(idx, loc, np.sqrt(d2).reshape(h, w), (th, tw))


# ---------------------------------------------------------------- NN-field maps


@nb.njit(cache=True, nogil=True)
def _window_score(nn_index, nn_x, nn_y, kappa, expt, x0, y0, tw, th, deformable):
    acc = 0.0
    for y in range(y0, y0 + th):
        for x in range(x0, x0 + tw):
            k = kappa[nn_index[y, x]]
            if deformable:
                dx = (x - x0) - nn_x[y, x]
                dy = (y - y0) - nn_y[y, x]
                acc += expt[k] / (np.sqrt(dx * dx + dy * dy) + 1.0)
            else:
                acc += expt[k]
    return acc


@nb.njit(cache=True, nogil=True)
def _nnf_rows(nn_index, nn_x, nn_y, tw, th, y_start, y_stop, kind, from_scratch):
    # kind: 0 = DDIS, 1 = DIS
    l = tw * th
    out_w = nn_index.shape[1] - tw + 1
    out = np.empty((y_stop - y_start, out_w))
    kappa = np.zeros(l, dtype=np.int64)
    expt = np.empty(l + 1)
    for k in range(l + 1):
        expt[k] = np.exp(1.0 - k)
    for y0 in range(y_start, y_stop):
        unique = 0
        kappa[:] = 0
        for y in range(y0, y0 + th):
            for x in range(tw):
                i = nn_index[y, x]
                if kappa[i] == 0:
                    unique += 1
                kappa[i] += 1
        for x0 in range(out_w):
            if x0 > 0:
                if from_scratch:
                    unique = 0
                    kappa[:] = 0
                    for y in range(y0, y0 + th):
                        for x in range(x0, x0 + tw):
                            i = nn_index[y, x]
                            if kappa[i] == 0:
                                unique += 1
                            kappa[i] += 1
                else:
                    for y in range(y0, y0 + th):
                        i = nn_index[y, x0 - 1]
                        kappa[i] -= 1
                        if kappa[i] == 0:
                            unique -= 1
                        i = nn_index[y, x0 + tw - 1]
                        if kappa[i] == 0:
                            unique += 1
                        kappa[i] += 1
            if kind == 1:
                out[y0 - y_start, x0] = unique / l
            else:
                out[y0 - y_start, x0] = _window_score(nn_index, nn_x, nn_y, kappa, expt,
                                                      x0, y0, tw, th, True) / l
    return out


def _nnf_map(nn: NNGrid, template_dims, kind: int, workers: int, from_scratch: bool = False):
    tw, th = template_dims
    if (th, tw) != tuple(nn.template_shape):
        raise InputError(f"template dims {tw}x{th} do not match the NN grid's template "
                         f"{nn.template_shape[1]}x{nn.template_shape[0]}")
    if tw > nn.width or th > nn.height:
        raise InputError("window larger than the NN grid")
    nx = np.ascontiguousarray(nn.nn_location[..., 0])
    ny = np.ascontiguousarray(nn.nn_location[..., 1])
    idx = np.ascontiguousarray(nn.nn_index, dtype=np.int64)
    out_h = nn.height - th + 1
    parts = _run_rows(lambda a, b: _nnf_rows(idx, nx, ny, tw, th, a, b, kind, from_scratch),
                      out_h, workers)
    return np.concatenate(parts, axis=0)


def ddis_map(nn: NNGrid, template_dims, workers: int = 1, from_scratch: bool = False) -> np.ndarray:
    """DDIS score of every template-sized window; ``template_dims`` is (tw, th) in cells.

    ``from_scratch=True`` recounts the table at every placement instead of
    sliding it; the output is identical and the option exists for checking.
    """
    return _nnf_map(nn, template_dims, 0, workers, from_scratch)


def dis_map(nn: NNGrid, template_dims, workers: int = 1, from_scratch: bool = False) -> np.ndarray:
    """Fraction of distinct template cells chosen as NN inside each window."""
    return _nnf_map(nn, template_dims, 1, workers, from_scratch)


def bbs_map_naive(target: FeatureGrid, template: FeatureGrid, guard: int = DEFAULT_BBS_GUARD) -> np.ndarray:
    """Windowed best-buddies score with exact NN in both directions.

    Quadratic in template size per window, so refused when the target grid
    has more than ``guard`` cells.
    """
    _check_pair(target, template)
    cells = target.width * target.height
    if cells > guard:
        raise SizeGuardError(
            f"BBS size guard exceeded: target grid has {cells} cells, bbs_guard allows {guard}"
        )
    th, tw = template.height, template.width
    h, w = target.height, target.width
    l = th * tw
    D = sq_dist_matrix(target.points(), template.points())
    nn_q = np.argmin(D, axis=1)  # each target cell -> template index
    local = (np.arange(th)[:, None] * w + np.arange(tw)[None, :]).ravel()
    out = np.empty((h - th + 1, w - tw + 1))
    for y0 in range(h - th + 1):
        for x0 in range(w - tw + 1):
            rows = local + (y0 * w + x0)
            nn_p = np.argmin(D[rows], axis=0)  # template index -> window position
            out[y0, x0] = np.count_nonzero(nn_q[rows[nn_p]] == np.arange(l)) / l
    return out


def _box_sum(a: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Sums over every (kh, kw) window of a 2-D or 3-D array (valid placements)."""
    c = np.cumsum(np.cumsum(a, axis=0), axis=1)
    c = np.pad(c, [(1, 0), (1, 0)] + [(0, 0)] * (a.ndim - 2))
    return c[kh:, kw:] - c[:-kh, kw:] - c[kh:, :-kw] + c[:-kh, :-kw]


def baseline_map(target: FeatureGrid, template: FeatureGrid, measure: str) -> np.ndarray:
    """Pixel-wise baselines: negated SSD, negated SAD, or mean per-channel ZNCC."""
    _check_pair(target, template)
    measure = measure.lower()
    T, t = target.data, template.data
    th, tw = t.shape[:2]
    oh, ow = T.shape[0] - th + 1, T.shape[1] - tw + 1

    def shifted(dy, dx):
        return T[dy:dy + oh, dx:dx + ow]

    if measure in ("ssd", "sad"):
        acc = np.zeros((oh, ow))
        for dy in range(th):
            for dx in range(tw):
                diff = shifted(dy, dx) - t[dy, dx]
                acc += (diff * diff).sum(axis=-1) if measure == "ssd" else np.abs(diff).sum(axis=-1)
        return 0.0 - acc
    if measure != "ncc":
        raise InputError(f"unknown baseline measure {measure!r}")

    n = th * tw
    tc = t - t.mean(axis=(0, 1))
    tvar = (tc * tc).sum(axis=(0, 1))
    wmean = _box_sum(T, th, tw) / n
    cov = np.zeros((oh, ow, T.shape[2]))
    wvar = np.zeros_like(cov)
    for dy in range(th):
        for dx in range(tw):
            s = shifted(dy, dx)
            cov += s * tc[dy, dx]
            c = s - wmean
            wvar += c * c
    tiny = n * 1e-24
    ok = (wvar > tiny) & (tvar > tiny)
    denom = np.sqrt(np.where(ok, wvar * tvar, 1.0))
    zncc = np.where(ok, cov / denom, 0.0)
    return np.clip(zncc, -1.0, 1.0).mean(axis=-1)


# ---------------------------------------------------------------- smoothing / localization


def smoothing_kernel(template_dims) -> tuple[int, int]:
    """Largest odd size not above a third of each template side (at least 1).

    Odd sizes keep the box centred; an even box shifts isolated peaks by a cell.
    """
    def odd(n):
        k = max(1, n // 3)
        return k if k % 2 else k - 1
    tw, th = template_dims
    return odd(tw), odd(th)


def smooth(score_map: np.ndarray, template_dims) -> np.ndarray:
    """Box-filter the map with a centred kernel of about a third of the
    template size (see :func:`smoothing_kernel`) via an integral image.

    At borders the kernel is cut to the in-bounds part and the mean is taken
    over that part only.
    """
    m = np.asarray(score_map, dtype=np.float64)
    if m.size == 0:
        raise InputError("empty similarity map")
    kw, kh = smoothing_kernel(template_dims)
    h, w = m.shape
    ii = np.zeros((h + 1, w + 1))
    ii[1:, 1:] = m.cumsum(axis=0).cumsum(axis=1)
    ys, xs = np.arange(h), np.arange(w)
    y0 = np.clip(ys - (kh - 1) // 2, 0, h)[:, None]
    y1 = np.clip(ys + kh // 2 + 1, 0, h)[:, None]
    x0 = np.clip(xs - (kw - 1) // 2, 0, w)[None, :]
    x1 = np.clip(xs + kw // 2 + 1, 0, w)[None, :]
    total = ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]
    return total / ((y1 - y0) * (x1 - x0))


def localize(raw: np.ndarray, smoothed: np.ndarray, template_size, grid_origin_offset=(0, 0),
             template_origin_offset=None) -> MatchResult:
    """Best placement on the smoothed map, converted to an image-pixel rectangle.

    ``template_size`` is the template's (w, h) in pixels. The rectangle's
    top-left is the placement shifted by the target grid's origin offset minus
    the template grid's (equal offsets cancel).
    """
    raw = np.asarray(raw)
    smoothed = np.asarray(smoothed)
    if raw.shape != smoothed.shape:
        raise InputError("raw and smoothed maps differ in shape")
    if template_origin_offset is None:
        template_origin_offset = grid_origin_offset
    flat = int(np.argmax(smoothed))
    y0, x0 = divmod(flat, smoothed.shape[1])
    x = x0 + grid_origin_offset[0] - template_origin_offset[0]
    y = y0 + grid_origin_offset[1] - template_origin_offset[1]
    return MatchResult((int(x), int(y), int(template_size[0]), int(template_size[1])),
                       float(raw[y0, x0]), float(smoothed[y0, x0]))


# ---------------------------------------------------------------- pipeline


def similarity_map(target: FeatureGrid, template: FeatureGrid, config: MatcherConfig) -> np.ndarray:
    m = config.measure
    if m in ("ssd", "sad", "ncc"):
        return baseline_map(target, template, m)
    if m == "bbs":
        return bbs_map_naive(target, template, config.bbs_guard)
    nn = compute_nn_grid(target, template, config.ann, config.workers)
    dims = (template.width, template.height)
    return ddis_map(nn, dims, config.workers) if m == "ddis" else dis_map(nn, dims, config.workers)


def match_grids(target: FeatureGrid, template: FeatureGrid, config: MatcherConfig = MatcherConfig(),
                template_size=None):
    """Score, smooth and localize. Returns (MatchResult, raw map, smoothed map).

    ``template_size`` defaults to the template grid size grown by twice its
    origin offset, i.e. the size of the image it was extracted from.
    """
    raw = similarity_map(target, template, config)
    sm = smooth(raw, (template.width, template.height)) if config.smoothing else raw
    if template_size is None:
        ox, oy = template.origin_offset
        template_size = (template.width + 2 * ox, template.height + 2 * oy)
    res = localize(raw, sm, template_size, target.origin_offset, template.origin_offset)
    return res, raw, sm


def match_images(target_img: np.ndarray, template_img: np.ndarray, config: MatcherConfig = MatcherConfig()):
    """Extract patch descriptors from both images and run :func:`match_grids`."""
    tgt = extract_patch_features(target_img, config.patch)
    tpl = extract_patch_features(template_img, config.patch)
    th, tw = np.asarray(template_img).shape[:2]
    return match_grids(tgt, tpl, config, template_size=(tw, th))


def save_map_csv(path, score_map: np.ndarray) -> None:
    with open(path, "w") as f:
        for row in np.asarray(score_map, dtype=np.float64):
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_map_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
