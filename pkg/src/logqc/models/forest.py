"""Random forest: bagged Gini CART trees with per-node feature subsampling."""

from __future__ import annotations

import numpy as np

from .._rng import substream
from ..validation import check_fit_inputs
from .base import BinaryClassifier
from .trees import DecisionTree


class RandomForest(BinaryClassifier):
    """Bootstrap-aggregated classification trees.

    Each tree draws a bootstrap sample and considers sqrt(p) features per
    node by default. Probability estimates average the per-tree leaf Pass
    fractions. Fully deterministic for a fixed seed.
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth=None,
        min_samples_leaf: int = 2,
        max_features="sqrt",
        oob_score: bool = False,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.oob_score = oob_score
        self.seed = seed

    def _resolve_max_features(self, p: int):
        if self.max_features is None:
            return None
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(p)))
        return max(1, min(p, int(self.max_features)))

    def fit(self, X, y):
        X, y = check_fit_inputs(X, y)
        n, p = X.shape
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        m = self._resolve_max_features(p)
        trees = []
        oob_sum = np.zeros(n)
        oob_count = np.zeros(n)
        for i in range(self.n_trees):
            rng = substream(self.seed, "tree", i)
            boot = rng.integers(0, n, size=n)
            tree = DecisionTree(
                mode="gini",
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                max_features=m,
                rng=rng,
            ).fit(X[boot], y[boot].astype(np.float64))
            trees.append(tree)
            if self.oob_score:
                out = np.ones(n, dtype=bool)
                out[boot] = False
                if out.any():
                    oob_sum[out] += tree.predict(X[out])
                    oob_count[out] += 1
        self.trees_ = trees
        self.feature_count_ = p
        if self.oob_score:
            seen = oob_count > 0
            if seen.any():
                pred = (oob_sum[seen] / oob_count[seen]) >= 0.5
                self.oob_error_ = float(np.mean(pred != (y[seen] == 1)))
            else:
                self.oob_error_ = float("nan")
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees_:
            total += tree.predict(X)
        return total / len(self.trees_)

    def to_payload(self) -> dict:
        return {"trees": [t.to_payload() for t in self.trees_]}

    def restore_payload(self, payload: dict):
        self.trees_ = [DecisionTree.from_payload(p) for p in payload["trees"]]
        self.feature_count_ = self.trees_[0].n_features_
        return self
