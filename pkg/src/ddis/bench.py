"""Accuracy scoring, success curves and synthetic template/target pairs."""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InputError
from .features import load_image, save_image
from .matcher import MatcherConfig, MatchResult, match_images

MANIFEST_HEADER = ["template_image", "tx", "ty", "tw", "th", "target_image", "gx", "gy", "gw", "gh"]
RESULTS_HEADER = ["pair_index", "measure", "accuracy", "raw_score", "smoothed_score", "wall_ms"]


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise InputError(f"rect size must be positive, got {self.w}x{self.h}")

    def inside(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x + self.w <= width and self.y + self.h <= height


def iou(a: Rect, b: Rect) -> float:
    """Pixel-count intersection over union of two rectangles."""
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


@dataclass(frozen=True)
class PairRecord:
    template_image: str
    template_rect: Rect
    target_image: str
    truth_rect: Rect


def write_manifest(path, records) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for r in records:
            t, g = r.template_rect, r.truth_rect
            w.writerow([r.template_image, t.x, t.y, t.w, t.h, r.target_image, g.x, g.y, g.w, g.h])


def read_manifest(path) -> list[PairRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise InputError(f"{path}: manifest header must be {','.join(MANIFEST_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise InputError(f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} fields")
            try:
                nums = [int(v) for v in row[1:5] + row[6:10]]
            except ValueError as e:
                raise InputError(f"{path}:{lineno}: {e}") from None
            out.append(PairRecord(row[0], Rect(*nums[:4]), row[5], Rect(*nums[4:])))
    return out


def load_pair(rec: PairRecord, base_dir="."):
    """Load and validate a record; returns (template crop, target image)."""
    base = Path(base_dir)
    src = load_image(base / rec.template_image)
    tgt = load_image(base / rec.target_image)
    if not rec.template_rect.inside(src.shape[1], src.shape[0]):
        raise InputError(f"template rect {rec.template_rect} outside {rec.template_image}")
    if not rec.truth_rect.inside(tgt.shape[1], tgt.shape[0]):
        raise InputError(f"truth rect {rec.truth_rect} outside {rec.target_image}")
    t = rec.template_rect
    return src[t.y:t.y + t.h, t.x:t.x + t.w].copy(), tgt


def run_pair(rec: PairRecord, config: MatcherConfig = MatcherConfig(), base_dir=".") -> tuple[MatchResult, float]:
    """Match one record and score the detection against its truth rectangle."""
    try:
        tpl, tgt = load_pair(rec, base_dir)
    except (OSError, InputError) as e:
        raise InputError(f"pair {rec.template_image} -> {rec.target_image}: {e}") from e
    res, _, _ = match_images(tgt, tpl, config)
    return res, iou(Rect(*res.rect), rec.truth_rect)


def run_bench(records, measures, config: MatcherConfig = MatcherConfig(), base_dir=".",
              workers: int = 1, timing: bool = True) -> list[dict]:
    """Every (pair, measure) combination, collected in manifest order."""
    jobs = [(i, rec, m) for i, rec in enumerate(records) for m in measures]

    def one(job):
        i, rec, m = job
        cfg = MatcherConfig(measure=m, ann=config.ann, smoothing=config.smoothing,
                            bbs_guard=config.bbs_guard, patch=config.patch, workers=1)
        t0 = time.perf_counter()
        res, acc = run_pair(rec, cfg, base_dir)
        ms = (time.perf_counter() - t0) * 1000.0
        return {"pair_index": i, "measure": m, "accuracy": acc, "raw_score": res.raw_score,
                "smoothed_score": res.smoothed_score, "wall_ms": ms if timing else None}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, jobs))
    return [one(j) for j in jobs]


def write_results(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in rows:
            ms = "" if r["wall_ms"] is None else f"{r['wall_ms']:.3f}"
            w.writerow([r["pair_index"], r["measure"], repr(float(r["accuracy"])),
                        repr(float(r["raw_score"])), repr(float(r["smoothed_score"])), ms])


# ---------------------------------------------------------------- success curves


@dataclass(frozen=True)
class SuccessCurve:
    thresholds: np.ndarray
    fractions: np.ndarray


def success_curve(accuracies, step: float = 0.01) -> SuccessCurve:
    """Fraction of accuracies strictly above each threshold in {0, step, ..., 1}."""
    a = np.asarray(accuracies, dtype=np.float64)
    if a.size == 0:
        raise InputError("need at least one accuracy value")
    k = int(round(1.0 / step))
    if not k >= 1 or abs(k * step - 1.0) > 1e-9:
        raise InputError(f"step must divide 1 evenly, got {step}")
    thresholds = np.arange(k + 1) / k
    fractions = (a[None, :] > thresholds[:, None]).mean(axis=1)
    return SuccessCurve(thresholds, fractions)


def auc(curve: SuccessCurve) -> float:
    """Rectangle-rule area: mean of the curve over its threshold grid."""
    return float(np.mean(curve.fractions))


# ---------------------------------------------------------------- synthetic pairs


@dataclass(frozen=True)
class SyntheticParams:
    size: int = 96
    template_size: int = 24
    occlusion_fraction: float = 0.0
    noise_sigma: float = 0.0  # in [0, 1] sample units
    shift: int | None = None  # max |shift| per axis; default size // 4
    local_jitter: float = 0.0  # max per-pixel displacement
    seed: int = 0


def _texture(rng, h, w, scales=(1.5, 3.0, 6.0)):
    """Colored multi-scale smoothed noise in [0, 1]."""
    img = np.zeros((h, w, 3))
    for s in scales:
        n = rng.normal(size=(h, w, 3))
        img += ndimage.gaussian_filter(n, sigma=(s, s, 0), mode="reflect") * s
    img -= img.min(axis=(0, 1))
    img /= img.max(axis=(0, 1))
    return img


def _smooth_field(rng, h, w, bound):
    if bound <= 0:
        return np.zeros((h, w))
    f = ndimage.gaussian_filter(rng.normal(size=(h, w)), sigma=max(h, w) / 6, mode="reflect")
    peak = np.abs(f).max()
    return f * (bound / peak) if peak > 0 else f


def render_pair(params: SyntheticParams, index: int = 0):
    """Build (template image, template rect, target image, truth rect) in memory.

    The template image and the target are independent textures. The target
    receives the template region, warped by a smooth displacement field
    bounded by ``local_jitter`` and moved by a random shift; a block covering
    ``occlusion_fraction`` of it is replaced by a distractor texture, then
    Gaussian noise is added.
    """
    S, ts = params.size, params.template_size
    if not 1 <= ts < S:
        raise InputError(f"template size {ts} must be smaller than image size {S}")
    if not 0 <= params.occlusion_fraction <= 1:
        raise InputError("occlusion_fraction must be in [0, 1]")
    shift = S // 4 if params.shift is None else params.shift
    rng = np.random.default_rng([params.seed, index])

    src = _texture(rng, S, S)
    tgt = _texture(rng, S, S)
    tx, ty = (int(v) for v in rng.integers(0, S - ts + 1, size=2))
    gx = int(np.clip(tx + rng.integers(-shift, shift + 1), 0, S - ts))
    gy = int(np.clip(ty + rng.integers(-shift, shift + 1), 0, S - ts))

    yy, xx = np.mgrid[ty:ty + ts, tx:tx + ts].astype(np.float64)
    dx = _smooth_field(rng, ts, ts, params.local_jitter)
    dy = _smooth_field(rng, ts, ts, params.local_jitter)
    sy = np.clip(yy + dy, 0, S - 1)
    sx = np.clip(xx + dx, 0, S - 1)
    patch = np.stack([ndimage.map_coordinates(src[..., c], [sy, sx], order=1) for c in range(3)], axis=-1)

    occ = int(round(params.occlusion_fraction * ts * ts))
    if occ > 0:
        ow = int(rng.integers(max(1, -(-occ // ts)), ts + 1))
        oh = min(ts, -(-occ // ow))
        ox = int(rng.integers(0, ts - ow + 1))
        oy = int(rng.integers(0, ts - oh + 1))
        patch[oy:oy + oh, ox:ox + ow] = _texture(rng, oh, ow, scales=(1.0, 2.0))

    tgt[gy:gy + ts, gx:gx + ts] = patch
    if params.noise_sigma > 0:
        tgt = tgt + rng.normal(scale=params.noise_sigma, size=tgt.shape)
    to8 = lambda a: np.clip(np.round(a * 255), 0, 255).astype(np.uint8)
    return to8(src), Rect(tx, ty, ts, ts), to8(tgt), Rect(gx, gy, ts, ts)


def gen_synthetic(params: SyntheticParams, out_dir, index: int = 0) -> PairRecord:
    """Render one pair, write its two PPM files to ``out_dir`` and return the record."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    src, trect, tgt, grect = render_pair(params, index)
    tname, gname = f"template_{index:04d}.ppm", f"target_{index:04d}.ppm"
    save_image(out / tname, src)
    save_image(out / gname, tgt)
    return PairRecord(tname, trect, gname, grect)


def gen_dataset(params: SyntheticParams, out_dir, count: int, manifest_name="manifest.csv") -> list[PairRecord]:
    recs = [gen_synthetic(params, out_dir, i) for i in range(count)]
    write_manifest(os.path.join(out_dir, manifest_name), recs)
    return recs
