"""Random-forest binary classifier with seeded, reproducible training.

Trees are grown on bootstrap samples with Gini splits over a random
subset of features per node, to purity, and vote by majority. Ties go to
the negative class both inside a leaf and across the ensemble.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .netstats import N_FEATURES, FeatureVector

FORMAT_VERSION = 1


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf.

    ``pos``/``neg`` hold the class counts reaching every node (bootstrap
    duplicates included), so leaves carry their votes and internal nodes
    carry what impurity importance needs.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    pos: np.ndarray
    neg: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def vote(self, X: np.ndarray) -> np.ndarray:
        leaf = self.apply(X)
        return (self.pos[leaf] > self.neg[leaf]).astype(np.int64)

    def impurity_decrease(self, n_features: int) -> np.ndarray:
        out = np.zeros(n_features)
        for i in np.flatnonzero(self.feature >= 0):
            l, r = self.left[i], self.right[i]
            out[self.feature[i]] += (
                _weighted_gini(self.pos[i], self.neg[i])
                - _weighted_gini(self.pos[l], self.neg[l])
                - _weighted_gini(self.pos[r], self.neg[r])
            )
        return out

    def to_nested(self, i: int = 0) -> dict:
        counts = [int(self.pos[i]), int(self.neg[i])]
        if self.feature[i] < 0:
            return {"positive_count": counts[0], "negative_count": counts[1]}
        return {
            "feature_index": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "counts": counts,
            "left": self.to_nested(int(self.left[i])),
            "right": self.to_nested(int(self.right[i])),
        }

    @classmethod
    def from_nested(cls, doc: dict) -> Tree:
        b = _Builder()

        def visit(node: dict) -> int:
            if "feature_index" not in node:
                return b.leaf(node["positive_count"], node["negative_count"])
            pos, neg = node["counts"]
            i = b.internal(node["feature_index"], node["threshold"], pos, neg)
            b.left[i] = visit(node["left"])
            b.right[i] = visit(node["right"])
            return i

        visit(doc)
        return b.finish()


def _weighted_gini(pos, neg) -> float:
    n = pos + neg
    return n - (pos * pos + neg * neg) / n if n else 0.0


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.pos, self.neg = [], [], [], [], [], []

    def _add(self, feature, threshold, pos, neg) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.pos.append(pos)
        self.neg.append(neg)
        return len(self.feature) - 1

    def leaf(self, pos, neg) -> int:
        return self._add(-1, 0.0, pos, neg)

    def internal(self, feature, threshold, pos, neg) -> int:
        return self._add(feature, threshold, pos, neg)

    def finish(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            pos=np.array(self.pos, dtype=np.int64),
            neg=np.array(self.neg, dtype=np.int64),
        )


def _best_split(X: np.ndarray, y: np.ndarray, samples: np.ndarray, feats: np.ndarray, pos: int):
    """Lowest weighted-Gini split over ``feats``; ties keep the earlier feature."""
    n = len(samples)
    Xs = X[np.ix_(samples, feats)]
    order = np.argsort(Xs, axis=0, kind="stable")
    V = np.take_along_axis(Xs, order, axis=0)
    Y = y[samples][order]
    cpos = np.cumsum(Y, axis=0)[:-1]
    L = np.arange(1, n, dtype=np.float64)[:, None]
    R = n - L
    cneg = L - cpos
    rpos = pos - cpos
    rneg = R - rpos
    # n * weighted_gini = n - score, so maximize score
    score = (cpos * cpos + cneg * cneg) / L + (rpos * rpos + rneg * rneg) / R
    valid = V[1:] > V[:-1]
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score.T))
    k, i = divmod(flat, n - 1)
    lo, hi = V[i, k], V[i + 1, k]
    thr = lo / 2.0 + hi / 2.0
    if thr >= hi or not math.isfinite(thr):
        thr = lo
    return int(feats[k]), float(thr)


def grow_tree(X: np.ndarray, y: np.ndarray, samples: np.ndarray, rng: np.random.Generator,
              max_features: int) -> Tree:
    n_features = X.shape[1]
    b = _Builder()
    stack = [(samples, None, False)]
    while stack:
        s, parent, is_left = stack.pop()
        pos = int(y[s].sum())
        neg = len(s) - pos
        split = None
        if pos and neg and len(s) >= 2:
            perm = rng.permutation(n_features)
            split = _best_split(X, y, s, perm[:max_features], pos)
            if split is None and max_features < n_features:
                # keep drawing features until one admits a split
                rest = perm[max_features:]
                for f in rest:
                    split = _best_split(X, y, s, np.array([f]), pos)
                    if split is not None:
                        break
        if split is None:
            i = b.leaf(pos, neg)
        else:
            f, thr = split
            i = b.internal(f, thr, pos, neg)
            mask = X[s, f] <= thr
            # right pushed first so the left subtree is numbered first
            stack.append((s[~mask], i, False))
            stack.append((s[mask], i, True))
        if parent is not None:
            (b.left if is_left else b.right)[parent] = i
    return b.finish()


@dataclass
class ForestModel:
    trees: list[Tree]
    seed: int
    feature_count: int = N_FEATURES
    max_features: int = 6
    bootstrap: bool = True
    training_meta: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def scores(self, X) -> np.ndarray:
        """Fraction of trees voting positive, per row."""
        X = as_matrix(X)
        if X.shape[1] != self.feature_count:
            raise ValueError(f"expected {self.feature_count} features, got {X.shape[1]}")
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            votes += tree.vote(X)
        return votes / len(self.trees)

    def predict_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        s = self.scores(X)
        return (s > 0.5).astype(np.int64), s

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "seed": self.seed,
            "n_trees": self.n_trees,
            "feature_count": self.feature_count,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "training_meta": self.training_meta,
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ForestModel:
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        trees = [Tree.from_nested(t) for t in doc["trees"]]
        if len(trees) != doc["n_trees"]:
            raise ValueError("tree count does not match n_trees")
        return cls(trees, doc["seed"], doc["feature_count"], doc["max_features"],
                   doc["bootstrap"], doc.get("training_meta", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> ForestModel:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def as_matrix(X) -> np.ndarray:
    if len(X) and isinstance(X[0], FeatureVector):
        X = [v.values for v in X]
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return X


def train(X, y: Sequence[int], n_trees: int = 100, seed: int = 0, max_features: int | None = None,
          bootstrap: bool = True) -> ForestModel:
    """Fit ``n_trees`` trees; tree ``i`` draws from ``default_rng([seed, i])``."""
    X = as_matrix(X) if len(X) else np.empty((0, 0))
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("no training data")
    if len(X) != len(y):
        raise ValueError("X and y differ in length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if n_trees < 1:
        raise ValueError("n_trees must be positive")
    n, d = X.shape
    if max_features is None:
        max_features = max(1, math.isqrt(d))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        samples = rng.integers(0, n, n) if bootstrap else np.arange(n)
        trees.append(grow_tree(X, y, samples, rng, max_features))
    meta = {"n_rows": int(n), "n_positive": int(y.sum()), "n_negative": int(n - y.sum())}
    return ForestModel(trees, seed, d, max_features, bootstrap, meta)


def predict(model: ForestModel, x) -> tuple[int, float]:
    """(label, score) for one row; label is 1 only when score > 0.5."""
    labels, scores = model.predict_many(x)
    return int(labels[0]), float(scores[0])


def feature_importance(model: ForestModel) -> np.ndarray:
    """Mean decrease in impurity, averaged over trees and normalized to sum 1."""
    total = np.zeros(model.feature_count)
    for tree in model.trees:
        total += tree.impurity_decrease(model.feature_count)
    total /= model.n_trees
    s = total.sum()
    if s <= 0:
        return np.full(model.feature_count, 1.0 / model.feature_count)
    return total / s
