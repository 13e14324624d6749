"""Batch image filters on (n, h, w, c) arrays in [0, 1].

Every function returns a new clipped array; channels are filtered independently.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .features import haar_dwt, haar_idwt

MAD_SCALE = 0.6745
CLAHE_BINS = 256


def _planes(x: np.ndarray) -> np.ndarray:
    """(n, h, w, c) -> (n*c, h, w)."""
    n, h, w, c = x.shape
    return np.moveaxis(x, -1, 1).reshape(n * c, h, w)


def _unplanes(p: np.ndarray, shape) -> np.ndarray:
    n, h, w, c = shape
    return np.moveaxis(p.reshape(n, c, h, w), 1, -1)


def image_rngs(seed: int, count: int):
    """One generator per image; image i's stream depends only on (seed, i)."""
    return [np.random.default_rng(np.random.SeedSequence([seed, i])) for i in range(count)]


def uniform_noise(x: np.ndarray, b: float, seed: int) -> np.ndarray:
    out = np.empty_like(x)
    for i, rng in enumerate(image_rngs(seed, x.shape[0])):
        out[i] = x[i] + rng.uniform(-b, b, size=x.shape[1:])
    return np.clip(out, 0.0, 1.0)


def gaussian_noise(x: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    out = np.empty_like(x)
    for i, rng in enumerate(image_rngs(seed, x.shape[0])):
        out[i] = x[i] + rng.normal(0.0, sigma, size=x.shape[1:])
    return np.clip(out, 0.0, 1.0)


def impulse_noise(x: np.ndarray, amount: float, seed: int) -> np.ndarray:
    """Salt and pepper: each pixel is replaced with probability ``amount``, half 0 and half 1."""
    out = x.copy()
    for i, rng in enumerate(image_rngs(seed, x.shape[0])):
        u = rng.random(x.shape[1:])
        out[i][u < amount / 2] = 0.0
        out[i][(u >= amount / 2) & (u < amount)] = 1.0
    return out


def gaussian_blur(x: np.ndarray, sigma: float) -> np.ndarray:
    return gaussian_denoise(x, sigma)


def median_blur(x: np.ndarray, k: int) -> np.ndarray:
    return np.clip(ndimage.median_filter(x, size=(1, k, k, 1), mode="reflect"), 0.0, 1.0)


def gamma(x: np.ndarray, gamma: float) -> np.ndarray:
    return np.clip(x**gamma, 0.0, 1.0)


def sigmoid(x: np.ndarray, cutoff: float, gain: float) -> np.ndarray:
    return np.clip(1.0 / (1.0 + np.exp(gain * (cutoff - x))), 0.0, 1.0)


def gaussian_denoise(x: np.ndarray, sigma: float) -> np.ndarray:
    return np.clip(ndimage.gaussian_filter(x, sigma=(0, sigma, sigma, 0), mode="reflect"), 0.0, 1.0)


def bilateral(x: np.ndarray, radius: int, sigma_spatial: float, sigma_range: float) -> np.ndarray:
    r = int(radius)
    padded = np.pad(x, ((0, 0), (r, r), (r, r), (0, 0)), mode="reflect")
    h, w = x.shape[1:3]
    num = np.zeros_like(x)
    den = np.zeros_like(x)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = padded[:, r + dy : r + dy + h, r + dx : r + dx + w, :]
            weight = np.exp(-(dy * dy + dx * dx) / (2 * sigma_spatial**2))
            weight = weight * np.exp(-((shifted - x) ** 2) / (2 * sigma_range**2))
            num += weight * shifted
            den += weight
    return np.clip(num / den, 0.0, 1.0)


def _soft(c: np.ndarray, thr: np.ndarray) -> np.ndarray:
    return np.sign(c) * np.maximum(np.abs(c) - thr, 0.0)


def wavelet_denoise(x: np.ndarray, method: str) -> np.ndarray:
    """One-level Haar soft-threshold denoising; ``method`` is "bayes" or "visu"."""
    planes = _planes(x)
    p, h, w = planes.shape
    ll, lh, hl, hh = haar_dwt(planes)
    sigma = np.median(np.abs(hh).reshape(p, -1), axis=1) / MAD_SCALE
    sigma = sigma[:, None, None]
    details = []
    for band in (lh, hl, hh):
        if method == "visu":
            thr = sigma * np.sqrt(2 * np.log(h * w))
        elif method == "bayes":
            var_y = (band**2).reshape(p, -1).mean(axis=1)[:, None, None]
            sigma_x = np.sqrt(np.maximum(var_y - sigma**2, 0.0))
            peak = np.abs(band).reshape(p, -1).max(axis=1)[:, None, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                thr = np.where(sigma_x > 0, sigma**2 / sigma_x, peak)
            thr = np.where(sigma > 0, thr, 0.0)
        else:
            raise ValueError(f"unknown wavelet method {method!r}")
        details.append(_soft(band, thr))
    rec = haar_idwt(ll, *details)[:, :h, :w]
    return np.clip(_unplanes(rec, x.shape), 0.0, 1.0)


def clahe(x: np.ndarray, tiles: int, limit: float) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization on a tiles x tiles grid.

    Tile histograms (256 bins) are clipped at ``limit`` times the uniform bin
    height, the excess is spread evenly over all bins, and per-tile mappings are
    blended bilinearly between tile centres.
    """
    t = int(tiles)
    planes = _planes(x)
    p, h, w = planes.shape
    ht, wt = -(-h // t) * t, -(-w // t) * t
    padded = np.pad(planes, ((0, 0), (0, ht - h), (0, wt - w)), mode="symmetric")
    th, tw = ht // t, wt // t
    area = th * tw

    bins = np.minimum((padded * CLAHE_BINS).astype(np.int64), CLAHE_BINS - 1)
    tiled = bins.reshape(p, t, th, t, tw).transpose(0, 1, 3, 2, 4).reshape(p * t * t, area)
    offsets = (np.arange(p * t * t) * CLAHE_BINS)[:, None]
    hist = np.bincount((tiled + offsets).ravel(), minlength=p * t * t * CLAHE_BINS)
    hist = hist.reshape(p, t, t, CLAHE_BINS).astype(np.float64)

    clip = limit * area / CLAHE_BINS
    excess = np.maximum(hist - clip, 0.0).sum(axis=-1, keepdims=True)
    hist = np.minimum(hist, clip) + excess / CLAHE_BINS
    lut = np.cumsum(hist, axis=-1) / area

    def axis_weights(size, step):
        g = np.clip((np.arange(size) + 0.5) / step - 0.5, 0, t - 1)
        lo = np.floor(g).astype(np.int64)
        hi = np.minimum(lo + 1, t - 1)
        return lo, hi, g - lo

    y0, y1, wy = axis_weights(h, th)
    x0, x1, wx = axis_weights(w, tw)
    pi = np.arange(p)[:, None, None]
    b = bins[:, :h, :w]
    y0, y1, wy = y0[None, :, None], y1[None, :, None], wy[None, :, None]
    x0, x1, wx = x0[None, None, :], x1[None, None, :], wx[None, None, :]
    out = (
        (1 - wy) * (1 - wx) * lut[pi, y0, x0, b]
        + (1 - wy) * wx * lut[pi, y0, x1, b]
        + wy * (1 - wx) * lut[pi, y1, x0, b]
        + wy * wx * lut[pi, y1, x1, b]
    )
    return np.clip(_unplanes(out, x.shape), 0.0, 1.0)
