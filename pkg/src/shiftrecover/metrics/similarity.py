"""SSIM, histogram divergences and Pearson correlation."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..imagecore import SampleSet, to_grayscale
from .transport import random_directions

SSIM_WINDOW = 8
SSIM_STRIDE = 4
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SMOOTHING = 1e-9


class DegenerateCorrelationError(ValueError):
    pass


def _gray_stack(x) -> np.ndarray:
    """SampleSet, (h, w) / (h, w, c) image, or (n, h, w, c) batch -> (n, h, w) luma."""
    if hasattr(x, "grayscale"):
        return x.grayscale()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 or (x.ndim == 3 and x.shape[-1] in (1, 3)):
        return to_grayscale(x)[None, ..., 0]
    if x.ndim == 4:
        return SampleSet(x).grayscale()
    return x


def ssim_per_image(a, b) -> np.ndarray:
    """Mean local SSIM for each image pair; 8x8 windows at stride 4, unit dynamic range."""
    x, y = _gray_stack(a), _gray_stack(b)
    if x.shape != y.shape:
        raise ValueError(f"image dimensions differ: {x.shape} vs {y.shape}")
    win = min(SSIM_WINDOW, x.shape[1], x.shape[2])
    wx = sliding_window_view(x, (win, win), axis=(1, 2))[:, ::SSIM_STRIDE, ::SSIM_STRIDE]
    wy = sliding_window_view(y, (win, win), axis=(1, 2))[:, ::SSIM_STRIDE, ::SSIM_STRIDE]
    mx, my = wx.mean(axis=(-1, -2)), wy.mean(axis=(-1, -2))
    vx = wx.var(axis=(-1, -2))
    vy = wy.var(axis=(-1, -2))
    cxy = (wx * wy).mean(axis=(-1, -2)) - mx * my
    num = (2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2)
    den = (mx**2 + my**2 + SSIM_C1) * (vx + vy + SSIM_C2)
    return (num / den).mean(axis=(1, 2))


def ssim(a, b) -> float:
    """SSIM of two images, or the mean over paired images of two batches."""
    return float(ssim_per_image(a, b).mean())


def _hist_pair(u: np.ndarray, v: np.ndarray, bins: int):
    lo = min(u.min(), v.min())
    hi = max(u.max(), v.max())
    if hi <= lo:
        hi = lo + 1.0
    hp, _ = np.histogram(u, bins=bins, range=(lo, hi))
    hq, _ = np.histogram(v, bins=bins, range=(lo, hi))
    p = hp / hp.sum() + SMOOTHING
    q = hq / hq.sum() + SMOOTHING
    return p / p.sum(), q / q.sum()


def _divergence_1d(u, v, kind: str, bins: int) -> float:
    p, q = _hist_pair(u, v, bins)
    if kind == "tv":
        return float(0.5 * np.abs(p - q).sum())
    if kind == "kl":
        return float((p * np.log(p / q)).sum())
    if kind == "js":
        m = 0.5 * (p + q)
        return float(0.5 * (p * np.log2(p / m)).sum() + 0.5 * (q * np.log2(q / m)).sum())
    raise ValueError(f"unknown divergence {kind!r}")


def histogram_divergence(a, b, kind: str = "tv", bins: int = 32) -> float:
    """TV, KL (nats) or JS (bits) between smoothed histograms on the joint range.

    Multi-dimensional clouds are compared coordinate by coordinate and averaged.
    """
    if bins < 2:
        raise ValueError("need at least two bins")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty cloud")
    if a.ndim == 1:
        return _divergence_1d(a, b, kind, bins)
    return float(np.mean([_divergence_1d(a[:, j], b[:, j], kind, bins) for j in range(a.shape[1])]))


def sliced_divergence(a, b, kind="tv", bins=32, slices=64, seed=0) -> float:
    """Histogram divergence averaged over random 1-D slices of (n, d) clouds."""
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)
    theta = random_directions(a.shape[1], slices, seed)
    return histogram_divergence(a @ theta, b @ theta, kind, bins)


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two equal-length 1-D sequences")
    if len(x) < 2:
        raise ValueError("pearson needs at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt((dx * dx).sum()), np.sqrt((dy * dy).sum())
    if sx == 0 or sy == 0:
        raise DegenerateCorrelationError("correlation undefined for zero variance")
    return float(np.clip((dx * dy).sum() / (sx * sy), -1.0, 1.0))
