"""Image and feature-map I/O plus per-pixel patch descriptors."""

from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import BadMagicError, HeaderError, InputError, TruncatedError


@dataclass(frozen=True)
class FeatureGrid:
    """Dense grid of descriptors, ``data`` shaped (height, width, d).

    ``origin_offset`` is the (x, y) pixel position of cell (0, 0) in the image
    the grid was extracted from.
    """

    data: np.ndarray
    origin_offset: tuple[int, int] = (0, 0)

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 3:
            raise InputError(f"feature grid must be 3-D (h, w, d), got {a.shape}")
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def d(self) -> int:
        return self.data.shape[2]

    def points(self) -> np.ndarray:
        """Descriptors flattened row-major to (height*width, d)."""
        return np.ascontiguousarray(self.data.reshape(-1, self.d))


@dataclass(frozen=True)
class PatchSpec:
    patch_size: int = 3
    color_space: Literal["rgb", "hsv"] = "rgb"

    def __post_init__(self):
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise InputError(f"patch_size must be odd and >= 1, got {self.patch_size}")
        if self.color_space not in ("rgb", "hsv"):
            raise InputError(f"unknown color space {self.color_space!r}")

    @property
    def d(self) -> int:
        return self.patch_size * self.patch_size * 3


# ---------------------------------------------------------------- PPM / PGM

_PNM_TOKEN = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")


def _read_header(buf: bytes, magic: bytes, nfields: int):
    if not buf.startswith(magic):
        raise BadMagicError(f"not a {magic.decode()} file (starts with {buf[:2]!r})")
    pos = 2
    vals = []
    for _ in range(nfields):
        m = _PNM_TOKEN.match(buf, pos)
        if m is None:
            raise HeaderError("header ended early")
        tok = m.group(2)
        if not tok.isdigit():
            raise HeaderError(f"non-numeric header field {tok!r}")
        vals.append(int(tok))
        pos = m.end()
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise HeaderError("missing whitespace after header")
    return vals, pos + 1


def load_image(path) -> np.ndarray:
    """Read a binary PPM (P6, maxval 255) into an (h, w, 3) uint8 array."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image: {path}")
    with open(path, "rb") as f:
        buf = f.read()
    (w, h, maxval), start = _read_header(buf, b"P6", 3)
    if w <= 0 or h <= 0:
        raise HeaderError(f"bad image size {w}x{h}")
    if maxval != 255:
        raise HeaderError(f"only maxval 255 is supported, got {maxval}")
    need = w * h * 3
    payload = buf[start:]
    if len(payload) < need:
        raise TruncatedError(f"{path}: expected {need} bytes of pixels, found {len(payload)}")
    return np.frombuffer(payload[:need], dtype=np.uint8).reshape(h, w, 3).copy()


def save_image(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise InputError("expected an (h, w, 3) uint8 image")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(img).tobytes())


def save_pgm16(path, values: np.ndarray) -> None:
    """Write a 2-D array as a 16-bit PGM, min-max scaled to 0..65535."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    data = np.round(scaled * 65535).astype(">u2")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n65535\n" % (v.shape[1], v.shape[0]))
        f.write(data.tobytes())


def load_pgm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    (w, h, maxval), start = _read_header(buf, b"P5", 3)
    if maxval != 65535:
        raise HeaderError(f"expected maxval 65535, got {maxval}")
    if len(buf) - start < 2 * w * h:
        raise TruncatedError("PGM payload too short")
    return np.frombuffer(buf[start : start + 2 * w * h], dtype=">u2").reshape(h, w).astype(np.uint16)


# ---------------------------------------------------------------- FMAP

_FMAP_MAGIC = b"FMAP"
_FMAP_HEADER = struct.Struct("<4sIII")


def save_feature_map(path, grid: FeatureGrid) -> None:
    with open(path, "wb") as f:
        f.write(_FMAP_HEADER.pack(_FMAP_MAGIC, grid.width, grid.height, grid.d))
        f.write(np.ascontiguousarray(grid.data, dtype="<f4").tobytes())


def load_feature_map(path) -> FeatureGrid:
    """Read an FMAP file: magic, u32 width/height/d, then little-endian float32."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such feature map: {path}")
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < _FMAP_HEADER.size:
        raise HeaderError(f"{path}: file too short for an FMAP header")
    magic, w, h, d = _FMAP_HEADER.unpack_from(buf)
    if magic != _FMAP_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if w == 0 or h == 0 or d == 0:
        raise HeaderError(f"{path}: dimensions must be positive, got {w}x{h}x{d}")
    need = 4 * w * h * d
    got = len(buf) - _FMAP_HEADER.size
    if got != need:
        raise TruncatedError(f"{path}: payload is {got} bytes, header implies {need}")
    data = np.frombuffer(buf, dtype="<f4", offset=_FMAP_HEADER.size).reshape(h, w, d)
    return FeatureGrid(data.astype(np.float64))


# ---------------------------------------------------------------- descriptors


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB->HSV for values in [0, 1]; hue in [0, 1)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1), 0.0)
    safe = np.where(delta > 0, delta, 1)
    h = np.select(
        [delta == 0, mx == r, mx == g],
        [0.0, ((g - b) / safe) % 6, (b - r) / safe + 2],
        default=(r - g) / safe + 4,
    )
    return np.stack([h / 6.0, s, mx], axis=-1)


def extract_patch_features(img: np.ndarray, spec: PatchSpec = PatchSpec()) -> FeatureGrid:
    """One descriptor per fully-interior patch center.

    The descriptor is the patch read row-major with channels interleaved per
    pixel, samples scaled to [0, 1].
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"expected an (h, w, 3) image, got {img.shape}")
    p = spec.patch_size
    h, w = img.shape[:2]
    if h < p or w < p:
        raise InputError(f"image {w}x{h} is smaller than the {p}x{p} patch")
    px = img.astype(np.float64) / 255.0
    if spec.color_space == "hsv":
        px = rgb_to_hsv(px)
    win = np.lib.stride_tricks.sliding_window_view(px, (p, p), axis=(0, 1))
    # win: (h-p+1, w-p+1, 3, p, p) -> (.., p, p, 3)
    desc = np.moveaxis(win, 2, -1).reshape(h - p + 1, w - p + 1, p * p * 3)
    half = p // 2
    return FeatureGrid(np.ascontiguousarray(desc), origin_offset=(half, half))


def standardize(grid: FeatureGrid) -> FeatureGrid:
    """Shift and scale each channel to zero mean, unit (population) std."""
    if grid.width * grid.height < 2:
        raise InputError("standardize needs at least two cells")
    flat = grid.points()
    out = np.zeros_like(flat)
    ok = flat.max(axis=0) > flat.min(axis=0)
    # prescale by peak magnitude so tiny channels don't underflow the variance
    x = flat[:, ok] / np.abs(flat[:, ok]).max(axis=0)
    out[:, ok] = (x - x.mean(axis=0)) / x.std(axis=0)
    return FeatureGrid(out.reshape(grid.data.shape), origin_offset=grid.origin_offset)
