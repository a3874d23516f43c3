"""CART regression trees (squared error), the base learner of the booster."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass(frozen=True)
class RegressionTree:
    """Binary tree stored as flat node arrays.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise samples with
    ``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the rest to
    ``right[i]``. Node 0 is the root.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        def rec(i):
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))

        return rec(0)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        out = self.value[node]
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, n_features: int) -> "RegressionTree":
        tree = cls(
            feature=np.asarray(d["feature"], dtype=int),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=int),
            right=np.asarray(d["right"], dtype=int),
            value=np.asarray(d["value"], dtype=float),
            n_features=n_features,
        )
        n = tree.n_nodes
        if n == 0 or not (len(tree.threshold) == len(tree.left) == len(tree.right) == len(tree.value) == n):
            raise ValueError("inconsistent tree arrays")
        internal = tree.feature != LEAF
        if np.any(tree.feature[internal] >= n_features) or np.any(
            (tree.left[internal] <= 0) | (tree.left[internal] >= n)
            | (tree.right[internal] <= 0) | (tree.right[internal] >= n)
        ):
            raise ValueError("tree node references out of range")
        return tree


def _best_split(X, r, min_leaf):
    """Best (gain, feature, threshold) over all features, or None.

    Candidate thresholds are midpoints between consecutive distinct values.
    Samples are ordered by (value, residual) so the result does not depend
    on the input order.
    """
    n = len(r)
    total = math.fsum(r)
    parent = total * total / n
    best = None
    for f in range(X.shape[1]):
        x = X[:, f]
        order = np.lexsort((r, x))
        xs, rs = x[order], r[order]
        csum = np.cumsum(rs)[:-1]
        nl = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        right = total - csum
        gain = csum * csum / nl + right * right / (n - nl) - parent
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        g = gain[i]
        # gains equal up to rounding keep the earlier feature
        if best is None or g > best[0] + 1e-12 * max(abs(best[0]), 1e-300):
            best = (g, f, 0.5 * (xs[i] + xs[i + 1]))
    return best


def fit_tree(X, r, max_depth: int, min_leaf: int = 1) -> RegressionTree:
    """Greedy squared-error regression tree fitted to ``r``.

    Splitting stops at ``max_depth``, when a node has fewer than
    ``2 * min_leaf`` samples, or when no split reduces the squared error.
    Leaves hold the mean of their residuals.
    """
    X = np.asarray(X, dtype=float)
    r = np.asarray(r, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("fit_tree needs a non-empty 2-D feature matrix")
    if len(r) != X.shape[0]:
        raise ValueError("X and r must have the same number of rows")
    if max_depth < 1 or min_leaf < 1:
        raise ValueError("max_depth and min_leaf must be at least 1")

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        # fsum is exact, so leaf values do not depend on sample order
        value.append(math.fsum(r[idx]) / len(idx))
        return len(feature) - 1

    root = new_node(np.arange(len(r)))
    stack = [(root, np.arange(len(r)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            continue
        rr = r[idx]
        sse = math.fsum((rr - value[node]) ** 2)
        if sse <= 0:
            continue
        split = _best_split(X[idx], rr, min_leaf)
        if split is None or split[0] <= 1e-12 * sse:
            continue
        _, f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return RegressionTree(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        value=np.asarray(value, dtype=float),
        n_features=X.shape[1],
    )
