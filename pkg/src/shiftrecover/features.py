"""Single-level Haar DWT and the (brightness, std, entropy) state vector."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .imagecore import SampleSet, to_grayscale

HIST_BINS = 256


class StateVector(NamedTuple):
    brightness: float
    std: float
    entropy: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


def _pad_even(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[-2:]
    if h % 2 == 0 and w % 2 == 0:
        return x
    pad = [(0, 0)] * (x.ndim - 2) + [(0, h % 2), (0, w % 2)]
    return np.pad(x, pad, mode="edge")


def haar_dwt(img: np.ndarray):
    """Orthonormal one-level Haar transform over the last two axes.

    Odd sizes are edge-padded to even. Returns ``(LL, LH, HL, HH)``.
    """
    x = _pad_even(np.asarray(img, dtype=np.float64))
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    ll = (a + b + c + d) / 2
    lh = (a - b + c - d) / 2
    hl = (a + b - c - d) / 2
    hh = (a - b - c + d) / 2
    return ll, lh, hl, hh


def haar_idwt(ll, lh, hl, hh) -> np.ndarray:
    a = (ll + lh + hl + hh) / 2
    b = (ll - lh + hl - hh) / 2
    c = (ll + lh - hl - hh) / 2
    d = (ll - lh - hl + hh) / 2
    h, w = ll.shape[-2:]
    out = np.empty(ll.shape[:-2] + (2 * h, 2 * w))
    out[..., 0::2, 0::2] = a
    out[..., 0::2, 1::2] = b
    out[..., 1::2, 0::2] = c
    out[..., 1::2, 1::2] = d
    return out


def row_entropy(values: np.ndarray, bins: int = HIST_BINS) -> np.ndarray:
    """Shannon entropy (bits) of each row's histogram over that row's min-max range."""
    values = np.atleast_2d(values)
    n, k = values.shape
    lo = values.min(axis=1, keepdims=True)
    span = values.max(axis=1, keepdims=True) - lo
    degenerate = span[:, 0] <= 0
    span = np.where(span > 0, span, 1.0)
    idx = np.minimum(((values - lo) / span * bins).astype(np.int64), bins - 1)
    counts = np.bincount((idx + bins * np.arange(n)[:, None]).ravel(), minlength=n * bins)
    p = counts.reshape(n, bins) / k
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    ent = terms.sum(axis=1)
    ent[degenerate] = 0.0
    return ent


def image_feature_matrix(gray: np.ndarray) -> np.ndarray:
    """Per-image state vectors for a stack of (n, h, w) grayscale planes -> (n, 3)."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim == 2:
        gray = gray[None]
    ll, lh, hl, hh = haar_dwt(gray)
    n = gray.shape[0]
    coeffs = np.concatenate([p.reshape(n, -1) for p in (ll, lh, hl, hh)], axis=1)
    brightness = ll.reshape(n, -1).mean(axis=1)
    std = coeffs.std(axis=1)
    entropy = row_entropy(coeffs)
    return np.stack([brightness, std, entropy], axis=1)


def image_features(img: np.ndarray) -> StateVector:
    gray = to_grayscale(img)[..., 0]
    return StateVector(*image_feature_matrix(gray)[0].tolist())


def batch_features(batch: SampleSet) -> np.ndarray:
    """(n, 3) per-image state vectors."""
    return image_feature_matrix(batch.grayscale())


def batch_state(batch: SampleSet) -> StateVector:
    """Mean of the per-image state vectors."""
    if len(batch) == 0:
        raise ValueError("batch_state of an empty batch")
    feats = batch_features(batch)
    # fsum is exactly rounded, so the mean does not depend on batch order
    return StateVector(*(math.fsum(col) / len(feats) for col in feats.T))
