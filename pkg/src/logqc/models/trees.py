"""CART decision trees shared by the forest and boosting models.

Splits use midpoint thresholds between distinct consecutive values, a
minimum leaf size, and a deterministic tie-break on (feature index,
threshold). Classification trees split on Gini impurity, regression trees
on squared error.
"""

from __future__ import annotations

import numpy as np


class DecisionTree:
    """A single fitted tree stored as flat node arrays.

    mode: "gini" for 0/1 targets (leaf value = positive fraction) or "mse"
    for real-valued targets (leaf value = mean). `max_features` limits the
    candidate features drawn per node; `rng` supplies that subsampling.
    """

    def __init__(self, mode="gini", max_depth=None, min_samples_leaf=2, max_features=None, rng=None):
        self.mode = mode
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.rng = rng

    def fit(self, X, t):
        X = np.asarray(X, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        n, p = X.shape
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        value: list[float] = []
        leaf_of = np.zeros(n, dtype=np.int32)
        max_depth = np.inf if self.max_depth is None else self.max_depth

        # stack entries: (sample indices, depth, parent node id, is_left_child)
        stack = [(np.arange(n), 0, -1, False)]
        while stack:
            idx, depth, parent, is_left = stack.pop()
            node_id = len(feature)
            if parent >= 0:
                if is_left:
                    left[parent] = node_id
                else:
                    right[parent] = node_id
            sub_t = t[idx]
            split = None
            if depth < max_depth and idx.size >= 2 * self.min_samples_leaf:
                split = self._best_split(X, sub_t, idx, p)
            if split is None:
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(float(sub_t.mean()))
                leaf_of[idx] = node_id
                continue
            feat, thr = split
            feature.append(feat)
            threshold.append(thr)
            left.append(-1)
            right.append(-1)
            value.append(float(sub_t.mean()))
            go_left = X[idx, feat] <= thr
            # push right first so the left child is processed (and numbered) next
            stack.append((idx[~go_left], depth + 1, node_id, False))
            stack.append((idx[go_left], depth + 1, node_id, True))

        self.feature_ = np.asarray(feature, dtype=np.int32)
        self.threshold_ = np.asarray(threshold, dtype=np.float64)
        self.left_ = np.asarray(left, dtype=np.int32)
        self.right_ = np.asarray(right, dtype=np.int32)
        self.value_ = np.asarray(value, dtype=np.float64)
        self.leaf_of_ = leaf_of
        self.n_features_ = p
        return self

    def _candidate_features(self, p: int) -> np.ndarray:
        if self.max_features is None or self.max_features >= p:
            return np.arange(p)
        feats = self.rng.choice(p, size=self.max_features, replace=False)
        feats.sort()  # ascending order keeps the (feature, threshold) tie-break
        return feats

    def _best_split(self, X, sub_t, idx, p):
        feats = self._candidate_features(p)
        sub = X[np.ix_(idx, feats)]
        m = sub.shape[0]
        order = np.argsort(sub, axis=0, kind="stable")
        sv = np.take_along_axis(sub, order, axis=0)
        st = sub_t[order]
        left_n = np.arange(1, m, dtype=np.float64)[:, None]
        right_n = m - left_n
        valid = sv[1:] != sv[:-1]
        valid &= (left_n >= self.min_samples_leaf) & (right_n >= self.min_samples_leaf)
        if not valid.any():
            return None

        if self.mode == "gini":
            pos = np.cumsum(st, axis=0)[:-1]
            total_pos = sub_t.sum()
            # weighted Gini in units of sample count; parent cost for the gain test
            cost = (
                left_n * (1.0 - (pos / left_n) ** 2 - ((left_n - pos) / left_n) ** 2)
                + right_n
                * (1.0 - ((total_pos - pos) / right_n) ** 2 - ((right_n - (total_pos - pos)) / right_n) ** 2)
            )
            frac = total_pos / m
            parent_cost = m * (1.0 - frac**2 - (1.0 - frac) ** 2)
        else:
            s1 = np.cumsum(st, axis=0)[:-1]
            s2 = np.cumsum(st**2, axis=0)[:-1]
            tot1 = sub_t.sum()
            tot2 = float((sub_t**2).sum())
            cost = (s2 - s1**2 / left_n) + ((tot2 - s2) - (tot1 - s1) ** 2 / right_n)
            parent_cost = tot2 - tot1**2 / m

        cost = np.where(valid, cost, np.inf)
        # transpose so the row-major argmin breaks ties by feature index, then threshold
        flat = int(np.argmin(cost.T))
        f_local, position = divmod(flat, m - 1)
        best = cost[position, f_local]
        if not np.isfinite(best) or best >= parent_cost - 1e-12:
            return None
        thr = 0.5 * (sv[position, f_local] + sv[position + 1, f_local])
        return int(feats[f_local]), float(thr)

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature_[node]
            active = feat >= 0
            if not active.any():
                return node
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, feat[rows]] <= self.threshold_[cur]
            node[rows] = np.where(go_left, self.left_[cur], self.right_[cur])

    def predict(self, X) -> np.ndarray:
        return self.value_[self.apply(X)]

    def set_leaf_values(self, node_ids: np.ndarray, values: np.ndarray) -> None:
        self.value_[node_ids] = values

    def to_payload(self) -> dict:
        return {
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "value": self.value_.tolist(),
            "n_features": int(self.n_features_),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "DecisionTree":
        tree = cls()
        tree.feature_ = np.asarray(payload["feature"], dtype=np.int32)
        tree.threshold_ = np.asarray(payload["threshold"], dtype=np.float64)
        tree.left_ = np.asarray(payload["left"], dtype=np.int32)
        tree.right_ = np.asarray(payload["right"], dtype=np.int32)
        tree.value_ = np.asarray(payload["value"], dtype=np.float64)
        tree.n_features_ = int(payload["n_features"])
        return tree
