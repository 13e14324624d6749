"""Empirical Wasserstein distances between equal-weight point clouds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .projection import make_projection


def _cloud(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"point cloud must be a non-empty (n, d) array, got {x.shape}")
    return x


def _check_p(p):
    if p not in (1, 2):
        raise ValueError(f"unsupported order p={p}; use 1 or 2")


def linear_assignment(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching on a square cost matrix (Hungarian method, O(n^3)).

    Returns ``col`` with row ``i`` assigned to column ``col[i]``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    # 1-based potentials; column 0 is a virtual source
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    col = np.empty(n, dtype=np.int64)
    col[owner[1:] - 1] = np.arange(n)
    return col


def _pair_cost(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return sq if p == 2 else np.sqrt(sq)


def wasserstein_1d(u, v, p: int = 1) -> float:
    """W_p between two 1-D empirical measures by quantile matching (sizes may differ)."""
    u = np.sort(np.asarray(u, dtype=np.float64).ravel())
    v = np.sort(np.asarray(v, dtype=np.float64).ravel())
    return float(_quantile_cost(u[:, None], v[:, None], p)[0]) ** (1.0 / p)


def _quantile_cost(us: np.ndarray, vs: np.ndarray, p: int) -> np.ndarray:
    """Mean |F^-1 - G^-1|^p per column for column-sorted samples (n, L) and (m, L)."""
    n, m = us.shape[0], vs.shape[0]
    if n == m:
        return (np.abs(us - vs) ** p).mean(axis=0)
    levels = np.union1d(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
    widths = np.diff(np.concatenate([[0.0], levels]))
    mids = levels - widths / 2
    iu = np.minimum((mids * n).astype(np.int64), n - 1)
    iv = np.minimum((mids * m).astype(np.int64), m - 1)
    return (widths[:, None] * np.abs(us[iu] - vs[iv]) ** p).sum(axis=0)


def wasserstein_exact(a, b, p: int = 1) -> float:
    """Exact W_p between equal-size, equal-weight clouds."""
    _check_p(p)
    a, b = _cloud(a), _cloud(b)
    if a.shape != b.shape:
        raise ValueError(f"cloud shapes differ: {a.shape} vs {b.shape}")
    if a.shape[1] == 1:
        return wasserstein_1d(a[:, 0], b[:, 0], p)
    cost = _pair_cost(a, b, p)
    col = linear_assignment(cost)
    # fsum is order independent, which keeps W(a, b) == W(b, a) bit for bit
    total = math.fsum(cost[np.arange(len(col)), col])
    return float(max(total, 0.0) / len(col)) ** (1.0 / p)


def random_directions(dim: int, count: int, seed: int) -> np.ndarray:
    """(dim, count) matrix of uniformly random unit columns."""
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((dim, count))
    return theta / np.linalg.norm(theta, axis=0, keepdims=True)


def sliced_from_slices(sa: np.ndarray, sb: np.ndarray, p: int) -> float:
    """Sliced W_p from already projected (n, L) and (m, L) slice values."""
    per_slice = _quantile_cost(np.sort(sa, axis=0), np.sort(sb, axis=0), p)
    return float(per_slice.mean()) ** (1.0 / p)


def wasserstein_sliced(a, b, p: int = 1, slices: int = 128, seed: int = 0) -> float:
    """Monte-Carlo sliced W_p over ``slices`` random unit directions."""
    _check_p(p)
    a, b = _cloud(a), _cloud(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"cloud sizes differ: {a.shape[0]} vs {b.shape[0]}")
    if slices < 1:
        raise ValueError("need at least one slice")
    theta = random_directions(a.shape[1], slices, seed)
    return sliced_from_slices(a @ theta, b @ theta, p)


def _flatten(batch) -> np.ndarray:
    if hasattr(batch, "grayscale"):
        gray = batch.grayscale()
        return gray.reshape(gray.shape[0], -1)
    x = np.asarray(batch, dtype=np.float64)
    return x.reshape(x.shape[0], -1)


@dataclass
class Estimator:
    """Projected sliced Wasserstein distance between two image batches.

    Images are flattened to grayscale vectors, pushed through an orthonormal
    projection to ``dim`` dimensions and compared along ``slices`` random
    directions. Projection and directions are fixed by ``seed``, so repeated
    calls are directly comparable.
    """

    dim: int = 64
    slices: int = 128
    p: int = 1
    seed: int = 0
    family: str = "orthonormal"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def directions(self, ambient: int) -> np.ndarray:
        if ambient not in self._cache:
            m = min(self.dim, ambient)
            proj = make_projection(ambient, m, self.family, self.seed)
            theta = random_directions(m, self.slices, self.seed + 1)
            self._cache[ambient] = proj.matrix.T @ theta
        return self._cache[ambient]

    def slice_values(self, batch) -> np.ndarray:
        x = _flatten(batch)
        return x @ self.directions(x.shape[1])

    def __call__(self, a, b) -> float:
        _check_p(self.p)
        sa = a if isinstance(a, SlicedRef) else self.slice_values(a)
        sb = b if isinstance(b, SlicedRef) else self.slice_values(b)
        return sliced_from_slices(np.asarray(sa), np.asarray(sb), self.p)

    def reference(self, batch) -> SlicedRef:
        """Pre-slice a batch that will be compared many times."""
        return SlicedRef(self.slice_values(batch))


class SlicedRef(np.ndarray):
    def __new__(cls, values):
        return np.asarray(values).view(cls)
