"""Gradient boosting: stagewise regression trees on logistic-loss gradients."""

from __future__ import annotations

import numpy as np

from ..errors import FitError
from ..validation import check_fit_inputs
from .base import BinaryClassifier, sigmoid
from .trees import DecisionTree

# Newton leaf steps are damped by the learning rate; these guards keep
# saturated leaves (tiny Hessian) from destabilising the loss.
_LEAF_VALUE_CLIP = 15.0
_HESSIAN_FLOOR = 1e-6


class GradientBoosting(BinaryClassifier):
    """Boosted shallow trees minimising logistic loss.

    The model starts from the log-odds of the class prior; each round fits a
    squared-error tree to the residuals y - p and applies a shrunken Newton
    step per leaf. Training loss is checked to be non-increasing each round.
    """

    def __init__(
        self,
        n_rounds: int = 100,
        learning_rate: float = 0.1,
        max_depth: int = 3,
        min_samples_leaf: int = 2,
        seed: int = 0,
    ):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed

    def fit(self, X, y):
        X, y = check_fit_inputs(X, y)
        y01 = y.astype(np.float64)
        prior = float(np.clip(y01.mean(), 1e-12, 1.0 - 1e-12))
        self.f0_ = float(np.log(prior / (1.0 - prior)))
        margins = np.full(X.shape[0], self.f0_)
        y_pm = 2.0 * y01 - 1.0
        losses = [float(np.mean(np.logaddexp(0.0, -y_pm * margins)))]
        trees: list[DecisionTree] = []
        for round_idx in range(self.n_rounds):
            p = sigmoid(margins)
            resid = y01 - p
            hess = p * (1.0 - p)
            tree = DecisionTree(
                mode="mse",
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
            ).fit(X, resid)
            leaf = tree.leaf_of_
            n_nodes = tree.value_.size
            num = np.bincount(leaf, weights=resid, minlength=n_nodes)
            den = np.bincount(leaf, weights=hess, minlength=n_nodes) + _HESSIAN_FLOOR
            gamma = np.clip(num / den, -_LEAF_VALUE_CLIP, _LEAF_VALUE_CLIP)
            leaf_ids = np.unique(leaf)
            tree.set_leaf_values(leaf_ids, self.learning_rate * gamma[leaf_ids])
            margins = margins + tree.value_[leaf]
            loss = float(np.mean(np.logaddexp(0.0, -y_pm * margins)))
            if loss > losses[-1] + 1e-9:
                raise FitError(
                    f"training loss increased at round {round_idx}: "
                    f"{losses[-1]:.12f} -> {loss:.12f}"
                )
            losses.append(loss)
            trees.append(tree)
        self.trees_ = trees
        self.train_losses_ = losses
        self.feature_count_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        margins = np.full(X.shape[0], self.f0_)
        for tree in self.trees_:
            margins += tree.predict(X)
        return margins

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def to_payload(self) -> dict:
        return {
            "f0": self.f0_,
            "trees": [t.to_payload() for t in self.trees_],
            "train_losses": self.train_losses_,
            "n_features": int(self.feature_count_),
        }

    def restore_payload(self, payload: dict):
        self.f0_ = float(payload["f0"])
        self.trees_ = [DecisionTree.from_payload(p) for p in payload["trees"]]
        self.train_losses_ = [float(v) for v in payload["train_losses"]]
        self.feature_count_ = int(payload["n_features"])
        return self
