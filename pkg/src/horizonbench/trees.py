"""CART regression trees, random forests with OOB error, and least-squares boosting."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyData

FOREST_TREES = 100
FOREST_WINDOW = 10
BOOST_CYCLES = 100
BOOST_MAX_SPLITS = 10
BOOST_LEARNING_RATE = 0.1
MIN_LEAF = 5


@dataclass(frozen=True)
class RegressionTree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_splits: int | None = None

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def predict(self, inputs) -> np.ndarray:
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while np.any(active):
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return self.value[node]

    def apply(self, inputs) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        node = np.zeros(X.shape[0], dtype=np.int64)
        for i in range(X.shape[0]):
            k = 0
            while self.feature[k] >= 0:
                k = self.left[k] if X[i, self.feature[k]] <= self.threshold[k] else self.right[k]
            node[i] = k
        return node


def _best_split(X, y, idx, min_leaf, features):
    """Best (gain, feature, threshold, left_idx, right_idx) for a node, or None.

    Gain is the SSE reduction. Ties resolve to the lowest feature index, then
    the lowest threshold, because argmax returns the first maximum.
    """
    m = idx.size
    if m < 2 * min_leaf:
        return None
    yn = y[idx]
    yc = yn - yn.mean()
    sse = float(np.dot(yc, yc))
    if sse <= 0.0:
        return None
    Xn = X[np.ix_(idx, features)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    left_sum = np.cumsum(yc[order], axis=0)[:-1]  # left child holds rows 0..i
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    # total of centered targets is zero, so the right sum is -left_sum
    gain = left_sum**2 / n_left + left_sum**2 / (m - n_left)
    valid = xs[1:] > xs[:-1]
    valid[: min_leaf - 1] = False
    valid[m - min_leaf:] = False
    gain = np.where(valid, gain, -np.inf)
    flat = gain.T.reshape(-1)
    best = int(np.argmax(flat))
    best_gain = flat[best]
    if not np.isfinite(best_gain) or best_gain <= 1e-12 * sse:
        return None
    fpos, pos = divmod(best, m - 1)
    threshold = 0.5 * (xs[pos, fpos] + xs[pos + 1, fpos])
    col = order[:, fpos]
    return best_gain, int(features[fpos]), float(threshold), idx[col[: pos + 1]], idx[col[pos + 1:]]


def fit_regression_tree(inputs, targets, max_splits: int | None = None, min_leaf: int = MIN_LEAF,
                        max_features: int | None = None, rng: np.random.Generator | None = None,
                        sample_index=None) -> RegressionTree:
    """Grow an MSE tree best-first until ``max_splits``, ``min_leaf`` or zero gain stops it.

    ``max_features`` draws that many candidate features per split from ``rng``.
    ``sample_index`` (possibly with repeats) selects the training rows.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise EmptyData("cannot fit a tree on zero rows")
    p = X.shape[1]
    idx0 = np.arange(y.size) if sample_index is None else np.asarray(sample_index)

    def candidates():
        if max_features is None or max_features >= p:
            return np.arange(p)
        return np.sort(rng.choice(p, size=max_features, replace=False))

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(value) - 1

    heap = []
    counter = 0

    def push(node, idx):
        nonlocal counter
        split = _best_split(X, y, idx, min_leaf, candidates())
        if split is not None:
            heapq.heappush(heap, (-split[0], counter, node, split))
            counter += 1

    root = new_node(idx0)
    splits = 0
    if max_splits is None or max_splits > 0:
        push(root, idx0)
    while heap and (max_splits is None or splits < max_splits):
        _, _, node, (_, f, thr, li, ri) = heapq.heappop(heap)
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        splits += 1
        push(left[node], li)
        push(right[node], ri)
    return RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                          np.array(right, dtype=np.int64), np.array(value), max_splits)


@dataclass(frozen=True)
class RandomForest:
    trees: tuple
    oob_error: float
    oob_excluded: int
    seed: int
    window_size: int = FOREST_WINDOW

    def predict(self, inputs) -> np.ndarray:
        return np.mean([t.predict(inputs) for t in self.trees], axis=0)


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Per-tree stream keyed on (seed, tree index), independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence([seed, tree_index]))


def fit_random_forest(inputs, targets, seed: int = 0, n_trees: int = FOREST_TREES, min_leaf: int = MIN_LEAF,
                      bootstrap: bool = True, max_features: int | str | None = "third") -> RandomForest:
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise EmptyData("cannot fit a forest on zero rows")
    if max_features == "third":
        max_features = math.ceil(p / 3)
    trees = []
    oob_sum = np.zeros(n)
    oob_count = np.zeros(n, dtype=np.int64)
    for k in range(n_trees):
        rng = tree_rng(seed, k)
        sample = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree = fit_regression_tree(X, y, min_leaf=min_leaf, max_features=max_features, rng=rng,
                                   sample_index=sample)
        trees.append(tree)
        out = np.ones(n, dtype=bool)
        out[sample] = False
        if np.any(out):
            oob_sum[out] += tree.predict(X[out])
            oob_count[out] += 1
    covered = oob_count > 0
    if np.any(covered):
        oob_pred = oob_sum[covered] / oob_count[covered]
        oob_error = float(np.sqrt(np.mean((y[covered] - oob_pred) ** 2)))
    else:
        oob_error = float("nan")
    return RandomForest(tuple(trees), oob_error, int(n - covered.sum()), seed)


@dataclass(frozen=True)
class BoostedEnsemble:
    initial_prediction: float
    stages: tuple
    learning_rate: float
    max_splits_per_tree: int = BOOST_MAX_SPLITS
    train_rmse_history: tuple = field(default=(), repr=False)

    def predict(self, inputs) -> np.ndarray:
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        out = np.full(X.shape[0], self.initial_prediction)
        for tree in self.stages:
            out += self.learning_rate * tree.predict(X)
        return out


def fit_gradient_boost(inputs, targets, learning_rate: float = BOOST_LEARNING_RATE,
                       n_cycles: int = BOOST_CYCLES, max_splits: int = BOOST_MAX_SPLITS) -> BoostedEnsemble:
    """LSBoost: each cycle fits a small tree to the current residuals."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise EmptyData("cannot boost on zero rows")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning rate must lie in (0, 1]")
    f0 = float(y.mean())
    current = np.full(y.size, f0)
    history = [float(np.sqrt(np.mean((y - current) ** 2)))]
    stages = []
    for _ in range(n_cycles):
        tree = fit_regression_tree(X, y - current, max_splits=max_splits, min_leaf=1)
        current = current + learning_rate * tree.predict(X)
        stages.append(tree)
        history.append(float(np.sqrt(np.mean((y - current) ** 2))))
    return BoostedEnsemble(f0, tuple(stages), learning_rate, max_splits, tuple(history))
