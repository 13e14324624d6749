from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("orthonormal", "gaussian", "sparse")
SPARSE_S = 3


@dataclass
class Projection:
    """Affine map x -> V x + b from R^n to R^m."""

    matrix: np.ndarray
    offset: np.ndarray
    seed: int
    family: str

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.matrix.T + self.offset


def orthonormal_rows(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed m x n matrix with orthonormal rows (V V^T = I)."""
    g = rng.standard_normal((n, m))
    q, r = np.linalg.qr(g)
    # sign fix makes the draw Haar-distributed and the factorization unique
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return q.T


def make_projection(n: int, m: int, family: str = "orthonormal", seed: int = 0) -> Projection:
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    if family == "orthonormal":
        v = orthonormal_rows(m, n, rng)
    elif family == "gaussian":
        v = rng.normal(0.0, np.sqrt(1.0 / m), size=(m, n))
    elif family == "sparse":
        scale = np.sqrt(SPARSE_S / m)
        u = rng.random((m, n))
        v = np.where(u < 0.5 / SPARSE_S, -scale, np.where(u < 1.0 / SPARSE_S, scale, 0.0))
    else:
        raise ValueError(f"unknown projection family {family!r}")
    return Projection(v, np.zeros(m), seed, family)
