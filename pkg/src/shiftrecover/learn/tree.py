"""Binary CART decision tree (Gini) and rank-based AUROC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


def gini(labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    p = labels.mean()
    return float(1.0 - p * p - (1 - p) * (1 - p))


@dataclass
class Node:
    prob: float
    count: int
    feature: int = -1
    threshold: float = 0.0
    left: Node | None = None
    right: Node | None = None

    @property
    def is_leaf(self):
        return self.left is None


@dataclass
class DecisionTree:
    root: Node
    max_depth: int
    min_leaf: int = 5
    n_features: int = field(default=3)

    def depth(self) -> int:
        def walk(node):
            return 0 if node.is_leaf else 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    def predict_proba(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        out = np.empty(len(xs))
        for i, x in enumerate(xs):
            out[i] = tree_predict(self, x)
        return out


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    n = len(y)
    parent = gini(y)
    best = (0.0, -1, 0.0)
    for f in range(x.shape[1]):
        order = np.argsort(x[:, f], kind="stable")
        xs, ys = x[order, f], y[order]
        left_pos = np.cumsum(ys)[:-1]
        left_n = np.arange(1, n)
        right_pos = ys.sum() - left_pos
        right_n = n - left_n
        pl, pr = left_pos / left_n, right_pos / right_n
        impurity = (left_n * (1 - pl**2 - (1 - pl) ** 2) + right_n * (1 - pr**2 - (1 - pr) ** 2)) / n
        valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        gain = np.where(valid, parent - impurity, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best[0] + 1e-12:
            best = (float(gain[k]), f, float((xs[k] + xs[k + 1]) / 2))
    return best


def tree_fit(xs, ys, max_depth: int = 8, min_leaf: int = 5) -> DecisionTree:
    """Greedy CART on binary labels; splits at midpoints between sorted distinct values."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(y) < 2:
        raise ValueError("tree_fit needs at least two samples")
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("features must be (n, d) with one label per row")

    def grow(idx, depth):
        yy = y[idx]
        node = Node(prob=float(yy.mean()), count=len(idx))
        if depth >= max_depth or len(idx) < 2 * min_leaf or yy.min() == yy.max():
            return node
        gain, f, thr = _best_split(x[idx], yy, min_leaf)
        if f < 0:
            return node
        mask = x[idx, f] <= thr
        node.feature, node.threshold = f, thr
        node.left = grow(idx[mask], depth + 1)
        node.right = grow(idx[~mask], depth + 1)
        return node

    return DecisionTree(grow(np.arange(len(y)), 0), max_depth, min_leaf, x.shape[1])


def tree_predict(tree: DecisionTree, x) -> float:
    """Class-1 fraction of the leaf that ``x`` falls into."""
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.prob


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (ties averaged)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
