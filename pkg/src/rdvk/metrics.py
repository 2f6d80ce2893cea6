"""Luma quality metrics (MS-SSIM, PSNR) and Bjontegaard-delta rate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DimensionError, OverlapError, RangeError
from .media import Frame, Sequence

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
WIN_SIZE = 11
WIN_SIGMA = 1.5
K1, K2 = 0.01, 0.03
PEAK = 255.0
# coarsest of the five scales must be at least this many samples per side
MIN_COARSE = 4
DB_CLAMP = 100.0


def _gauss(size, sigma=WIN_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    s = len(g)
    rows = sliding_window_view(img, s, axis=0) @ g  # (h-s+1, w)
    return sliding_window_view(rows, s, axis=1) @ g


def _ssim_terms(x, y):
    """Mean contrast-structure and mean SSIM at one scale."""
    size = min(WIN_SIZE, x.shape[0], x.shape[1])
    g = _gauss(size)
    c1 = (K1 * PEAK) ** 2
    c2 = (K2 * PEAK) ** 2
    mx = _filter_valid(x, g)
    my = _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    return float(np.mean(cs)), float(np.mean(lum * cs))


def _halve(img):
    # odd sizes repeat their last row/column, so the result is ceil(n / 2)
    h, w = img.shape
    img = np.pad(img, ((0, h % 2), (0, w % 2)), mode="edge")
    return (img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2]) / 4.0


def ms_ssim_plane(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    levels = len(MS_SSIM_WEIGHTS)
    if min(a.shape) >> (levels - 1) < MIN_COARSE:
        raise DimensionError(
            f"{a.shape[1]}x{a.shape[0]} is too small for {levels} scales "
            f"(need at least {MIN_COARSE << (levels - 1)} per side)"
        )
    value = 1.0
    for i, w in enumerate(MS_SSIM_WEIGHTS):
        cs, ssim = _ssim_terms(a, b)
        term = ssim if i == levels - 1 else cs
        # negative structure terms would make the power undefined
        value *= max(term, 0.0) ** w
        if i < levels - 1:
            a, b = _halve(a), _halve(b)
    return value


def _luma_pairs(a, b):
    if isinstance(a, Sequence) or isinstance(b, Sequence):
        fa = a.frames if isinstance(a, Sequence) else [a]
        fb = b.frames if isinstance(b, Sequence) else [b]
        if len(fa) != len(fb) or not fa:
            raise DimensionError(f"frame count mismatch {len(fa)} vs {len(fb)}")
        pairs = [(x.y, y.y) for x, y in zip(fa, fb)]
    elif isinstance(a, Frame):
        pairs = [(a.y, b.y)]
    else:
        pairs = [(np.asarray(a), np.asarray(b))]
    for x, y in pairs:
        if x.shape != y.shape:
            raise DimensionError(f"geometry mismatch {x.shape} vs {y.shape}")
    return pairs


def ms_ssim(a, b) -> float:
    """5-scale luma MS-SSIM; for sequences, the mean over frames."""
    pairs = _luma_pairs(a, b)
    return float(np.mean([ms_ssim_plane(x, y) for x, y in pairs]))


def ms_ssim_db(s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise RangeError(f"MS-SSIM {s} outside [0, 1]")
    if s == 1.0:
        return DB_CLAMP
    return -10.0 * math.log10(1.0 - s)


def mse(a, b) -> float:
    pairs = _luma_pairs(a, b)
    errs = []
    for x, y in pairs:
        d = x.astype(np.float64) - y
        errs.append(np.mean(d * d))
    return float(np.mean(errs))


def psnr(a, b) -> float:
    m = mse(a, b)
    if m == 0:
        return DB_CLAMP
    return 10.0 * math.log10(PEAK * PEAK / m)


@dataclass(frozen=True)
class RdPoint:
    rate: float
    quality: float

    def __post_init__(self):
        if not self.rate > 0:
            raise RangeError(f"rate must be positive, got {self.rate}")


def _as_points(curve) -> list:
    pts = [p if isinstance(p, RdPoint) else RdPoint(*p) for p in curve]
    if len(pts) < 4:
        raise ConfigError(f"BD-rate needs at least 4 points per curve, got {len(pts)}")
    return sorted(pts, key=lambda p: (p.rate, p.quality))


def bd_rate(anchor: Iterable, test: Iterable, min_overlap: float = 1.0) -> float:
    """Average rate difference of ``test`` against ``anchor`` at equal quality, in percent.

    Classic Bjontegaard: cubic fit of log10(rate) against quality, integrated
    over the shared quality interval.
    """
    a, t = _as_points(anchor), _as_points(test)
    qa = np.array([p.quality for p in a])
    qt = np.array([p.quality for p in t])
    lo = max(qa.min(), qt.min())
    hi = min(qa.max(), qt.max())
    if hi <= lo or hi - lo < min_overlap:
        raise OverlapError(f"quality overlap [{lo:.3f}, {hi:.3f}] is too small")
    fa = np.polyint(np.polyfit(qa, np.log10([p.rate for p in a]), 3))
    ft = np.polyint(np.polyfit(qt, np.log10([p.rate for p in t]), 3))
    ia = np.polyval(fa, hi) - np.polyval(fa, lo)
    it = np.polyval(ft, hi) - np.polyval(ft, lo)
    return (10 ** ((it - ia) / (hi - lo)) - 1) * 100
