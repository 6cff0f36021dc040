"""Binary-classification metrics, stratified k-fold machinery, and grid search.

The positive class is Pass (label 1) throughout. AUC is the Mann-Whitney
statistic: the fraction of (positive, negative) pairs where the positive
sample outscores the negative one, ties counted one half.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import substream
from .errors import DataError
from .validation import as_binary_labels, as_scores


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values assigned the mean rank of their block."""
    order = np.argsort(values, kind="stable")
    sv = values[order]
    new_block = np.empty(sv.size, dtype=bool)
    new_block[0] = True
    np.not_equal(sv[1:], sv[:-1], out=new_block[1:])
    boundaries = np.flatnonzero(np.append(new_block, True))
    # block g spans [boundaries[g], boundaries[g+1]); midrank is exact in floats
    block_rank = (boundaries[:-1] + boundaries[1:] + 1) / 2.0
    ranks = np.empty(sv.size, dtype=np.float64)
    ranks[order] = block_rank[np.cumsum(new_block) - 1]
    return ranks


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) formulation."""
    s = as_scores(scores)
    y = as_binary_labels(labels, name="labels")
    if s.size != y.size:
        raise DataError("scores and labels must have the same length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("auc requires both classes to be present")
    rank_sum_pos = float(_midranks(s)[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class RocCurve:
    """ROC curve points ordered by descending threshold, plus trapezoidal area."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def csv_rows(self):
        return [(f, t, th) for f, t, th in self.points()]


def roc_curve(scores, labels) -> RocCurve:
    """ROC curve with one point per distinct score, thresholds descending."""
    s = as_scores(scores)
    y = as_binary_labels(labels, name="labels")
    if s.size != y.size:
        raise DataError("scores and labels must have the same length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("roc_curve requires both classes to be present")
    order = np.argsort(-s, kind="stable")
    ss = s[order]
    yy = y[order].astype(np.float64)
    # last index of each tied block marks a distinct threshold
    distinct = np.flatnonzero(np.append(ss[1:] != ss[:-1], True))
    tp = np.cumsum(yy)[distinct]
    fp = (distinct + 1) - tp
    tpr = np.concatenate(([0.0], tp / n_pos))
    fpr = np.concatenate(([0.0], fp / n_neg))
    thresholds = np.concatenate(([np.inf], ss[distinct]))
    area = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1])) / 2.0)
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=area)


@dataclass
class MetricsReport:
    """Scalar metrics at a fixed decision threshold plus confusion counts."""

    auc: float
    accuracy: float
    precision: float
    recall: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "threshold": self.threshold,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
        }


def thresholded_metrics(scores, labels, threshold: float = 0.5) -> MetricsReport:
    """Confusion-based metrics with score >= threshold predicting Pass.

    Precision/recall are NaN when their denominator is zero; AUC is NaN when
    only one class is present.
    """
    s = as_scores(scores)
    y = as_binary_labels(labels, name="labels")
    if s.size != y.size:
        raise DataError("scores and labels must have the same length")
    pred = s >= threshold
    actual = y == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    tn = int(np.sum(~pred & ~actual))
    fn = int(np.sum(~pred & actual))
    n = s.size
    accuracy = (tp + tn) / n if n else float("nan")
    precision = tp / (tp + fp) if tp + fp > 0 else float("nan")
    recall = tp / (tp + fn) if tp + fn > 0 else float("nan")
    both_classes = 0 < int(y.sum()) < y.size
    area = auc(s, y) if both_classes else float("nan")
    return MetricsReport(
        auc=area,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


@dataclass
class FoldPlan:
    """Assignment of samples to k cross-validation folds."""

    k: int
    fold_of: np.ndarray
    stratified: bool
    seed: int
    grouped: bool = False

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def splits(self):
        for f in range(self.k):
            yield self.train_indices(f), self.test_indices(f)

    def sizes(self) -> list[int]:
        return [int(np.sum(self.fold_of == f)) for f in range(self.k)]


def make_folds(labels, k: int, seed: int, groups=None, stratified: bool = True) -> FoldPlan:
    """Deterministic stratified fold assignment.

    Without groups, fold sizes differ by at most one and each fold's class
    count is within one sample of an even share. With groups, samples sharing
    a group key always share a fold and balance is best-effort greedy.
    """
    y = as_binary_labels(labels, name="labels")
    n = y.size
    if k < 2:
        raise DataError("k must be at least 2")
    if k > n:
        raise DataError(f"k={k} exceeds the number of samples ({n})")
    rng = substream(seed, "folds", k)
    fold_of = np.full(n, -1, dtype=np.int64)

    if groups is not None:
        group_keys = [str(g) for g in groups]
        if len(group_keys) != n:
            raise DataError("groups must align with labels")
        by_group: dict[str, list[int]] = {}
        for i, g in enumerate(group_keys):
            by_group.setdefault(g, []).append(i)
        # big groups first so small ones can even things out
        ordered = sorted(by_group.items(), key=lambda kv: (-len(kv[1]), kv[0]))
        loads = np.zeros(k, dtype=np.int64)
        pos_loads = np.zeros(k, dtype=np.int64)
        for key, idx in ordered:
            n_pos = int(y[idx].sum())
            best = min(range(k), key=lambda f: (loads[f], pos_loads[f] if n_pos else 0, f))
            fold_of[idx] = best
            loads[best] += len(idx)
            pos_loads[best] += n_pos
        return FoldPlan(k=k, fold_of=fold_of, stratified=stratified, seed=seed, grouped=True)

    if stratified:
        loads = np.zeros(k, dtype=np.int64)
        for cls in (1, 0):
            idx = np.flatnonzero(y == cls)
            if idx.size and idx.size < k:
                raise DataError(
                    f"class {cls} has {idx.size} samples; stratified folding needs at least k={k}"
                )
            perm = rng.permutation(idx)
            base, extra = divmod(perm.size, k)
            counts = np.full(k, base, dtype=np.int64)
            if extra:
                # extras go to the currently lightest folds (ties by index)
                order = np.lexsort((np.arange(k), loads))
                counts[order[:extra]] += 1
            pos = 0
            for f in range(k):
                fold_of[perm[pos : pos + counts[f]]] = f
                pos += counts[f]
            loads += counts
    else:
        perm = rng.permutation(n)
        for f in range(k):
            fold_of[perm[f::k]] = f
    return FoldPlan(k=k, fold_of=fold_of, stratified=stratified, seed=seed)


@dataclass
class GridSearchResult:
    """Grid-search outcome: winning configuration plus the full CV table."""

    best_params: dict
    best_auc: float
    table: list = field(default_factory=list)  # (params, mean_auc, fold_aucs)

    def csv_rows(self):
        rows = []
        for params, mean_auc, fold_aucs in self.table:
            rows.append(
                (";".join(f"{k}={v}" for k, v in params.items()), mean_auc)
                + tuple(fold_aucs)
            )
        return rows


def cv_scores(model_factory, X, y, folds: FoldPlan) -> tuple[list[float], list[np.ndarray]]:
    """Per-fold test AUCs and score vectors for a model factory under a fold plan."""
    fold_aucs: list[float] = []
    fold_scores: list[np.ndarray] = []
    for train_idx, test_idx in folds.splits():
        model = model_factory()
        model.fit(X[train_idx], y[train_idx])
        scores = model.predict_proba(X[test_idx])
        fold_scores.append(scores)
        fold_aucs.append(auc(scores, y[test_idx]))
    return fold_aucs, fold_scores


def grid_search(spec, X, y, folds: FoldPlan):
    """Exhaustive grid search maximising mean CV AUC.

    Returns (best_spec, GridSearchResult). Candidates are evaluated in the
    grid's declared order and ties keep the earliest configuration. An empty
    grid evaluates the spec's base hyperparameters once.
    """
    from .models import build_model  # local to keep module import order flexible

    grid = spec.grid or {}
    keys = list(grid.keys())
    combos = [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]
    if not combos:
        combos = [{}]
    table = []
    best_params = None
    best_auc = -np.inf
    for combo in combos:
        params = {**spec.hyperparameters, **combo}
        candidate = replace(spec, hyperparameters=params, grid={})
        fold_aucs, _ = cv_scores(lambda: build_model(candidate), X, y, folds)
        mean_auc = float(np.mean(fold_aucs))
        table.append((combo, mean_auc, [float(a) for a in fold_aucs]))
        if mean_auc > best_auc:
            best_auc = mean_auc
            best_params = params
    best_spec = replace(spec, hyperparameters=best_params, grid={})
    return best_spec, GridSearchResult(best_params=best_params, best_auc=float(best_auc), table=table)
