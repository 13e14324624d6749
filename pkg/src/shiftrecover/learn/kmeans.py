from __future__ import annotations

from typing import NamedTuple

import numpy as np


class KMeansResult(NamedTuple):
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    history: list


def _sq_dists(x, c):
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1)


def kmeans(xs, k: int, seed: int = 0, max_iter: int = 300, init=None) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; stops once assignments are stable.

    ``init`` optionally fixes the first centroids; the rest are k-means++ draws.
    """
    x = np.asarray(xs, dtype=np.float64)
    if k < 1 or k > len(x):
        raise ValueError(f"k={k} must be in 1..{len(x)}")
    rng = np.random.default_rng(seed)
    centroids = list(init) if init is not None else [x[rng.integers(len(x))]]
    for _ in range(len(centroids), k):
        d2 = _sq_dists(x, np.array(centroids)).min(axis=1)
        total = d2.sum()
        if total == 0:
            centroids.append(x[rng.integers(len(x))])
            continue
        centroids.append(x[rng.choice(len(x), p=d2 / total)])
    centroids = np.array(centroids)

    assign = None
    history = []
    for _ in range(max_iter):
        d2 = _sq_dists(x, centroids)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(x)), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in range(k):
            members = x[assign == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    inertia = float(_sq_dists(x, centroids)[np.arange(len(x)), assign].sum())
    return KMeansResult(centroids, assign, inertia, history)


def elbow(xs, k_max: int = 10, seed: int = 0) -> list[float]:
    """Inertia for k = 1..k_max.

    Each k is warm-started from the k-1 solution plus one k-means++ centroid
    (so it can only improve on k-1) and compared with a fresh run.
    """
    out = []
    prev = None
    for k in range(1, min(k_max, len(xs)) + 1):
        runs = [kmeans(xs, k, seed + k)]
        if prev is not None:
            runs.append(kmeans(xs, k, seed + k, init=prev.centroids))
        prev = min(runs, key=lambda r: r.inertia)
        out.append(prev.inertia)
    return out


def elbow_k(inertias) -> int:
    """k at the point farthest below the chord joining the first and last inertia."""
    y = np.asarray(inertias, dtype=np.float64)
    if len(y) < 3:
        return len(y)
    x = np.arange(1, len(y) + 1, dtype=np.float64)
    chord = y[0] + (y[-1] - y[0]) * (x - 1) / (x[-1] - 1)
    return int(np.argmax(chord - y)) + 1
