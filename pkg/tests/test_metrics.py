import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logqc.errors import DataError
from logqc.metrics import (
    auc,
    cv_scores,
    grid_search,
    make_folds,
    roc_curve,
    thresholded_metrics,
)
from logqc.models import default_spec

from conftest import brute_force_auc


class TestAuc:
    def test_hand_case(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_perfect_ranking(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_scores_equal(self):
        assert auc([0.3, 0.3, 0.3, 0.3], [1, 0, 1, 0]) == 0.5

    def test_reversed_ranking(self):
        assert auc([0.1, 0.9], [1, 0]) == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            auc([0.1, 0.2], [1, 1])

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            y = rng.integers(0, 2, n)
            if len(set(y.tolist())) < 2:
                continue
            # quantized scores force plenty of ties
            s = np.round(rng.random(n), 1)
            assert auc(s, y) == brute_force_auc(s, y)

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=30).filter(lambda y: 0 < sum(y) < len(y)),
           st.randoms(use_true_random=False))
    @settings(max_examples=60, deadline=None)
    def test_flip_identity_for_tie_free_scores(self, y, rnd):
        n = len(y)
        scores = rnd.sample(range(1000), n)
        scores = np.asarray(scores, dtype=float)
        y = np.asarray(y)
        assert auc(scores, y) + auc(scores, 1 - y) == pytest.approx(1.0, abs=1e-12)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(12)
        s = rng.random(30)
        y = (rng.random(30) < 0.5).astype(int)
        y[0], y[1] = 0, 1
        base = auc(s, y)
        assert auc(np.exp(3 * s), y) == pytest.approx(base, abs=1e-12)
        assert auc(2 * s - 5, y) == pytest.approx(base, abs=1e-12)


class TestRocCurve:
    def test_two_samples_perfectly_ranked(self):
        rc = roc_curve([0.9, 0.1], [1, 0])
        assert rc.points() == [(0.0, 0.0, float("inf")), (0.0, 1.0, 0.9), (1.0, 1.0, 0.1)]
        assert rc.auc == 1.0

    def test_reversed_ranking_area_zero(self):
        rc = roc_curve([0.1, 0.9], [1, 0])
        assert rc.auc == 0.0

    def test_area_matches_auc(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = int(rng.integers(4, 25))
            y = rng.integers(0, 2, n)
            if len(set(y.tolist())) < 2:
                continue
            s = np.round(rng.random(n), 2)
            rc = roc_curve(s, y)
            assert abs(rc.auc - auc(s, y)) <= 1e-12

    def test_monotone_with_endpoints(self):
        rng = np.random.default_rng(5)
        s = rng.random(40)
        y = rng.integers(0, 2, 40)
        y[:2] = [0, 1]
        rc = roc_curve(s, y)
        assert np.all(np.diff(rc.fpr) >= 0)
        assert np.all(np.diff(rc.tpr) >= 0)
        assert (rc.fpr[0], rc.tpr[0]) == (0.0, 0.0)
        assert (rc.fpr[-1], rc.tpr[-1]) == (1.0, 1.0)


class TestThresholdedMetrics:
    def test_all_correct(self):
        report = thresholded_metrics([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])
        assert report.accuracy == 1.0
        assert report.precision == 1.0
        assert report.recall == 1.0

    def test_predict_all_pass_on_60_40(self):
        scores = np.full(10, 0.9)
        labels = np.array([1] * 6 + [0] * 4)
        report = thresholded_metrics(scores, labels)
        assert report.recall == 1.0
        assert report.precision == pytest.approx(0.6)
        assert report.accuracy == pytest.approx(0.6)

    def test_confusion_counts_consistent(self):
        report = thresholded_metrics([0.9, 0.4, 0.6, 0.2], [1, 1, 0, 0], threshold=0.5)
        assert (report.tp, report.fn, report.fp, report.tn) == (1, 1, 1, 1)
        assert report.accuracy == pytest.approx((report.tp + report.tn) / 4)


class TestMakeFolds:
    def test_even_sizes(self):
        plan = make_folds([0, 1] * 5, 5, seed=1)
        assert plan.sizes() == [2, 2, 2, 2, 2]

    def test_sizes_differ_by_at_most_one(self):
        rng = np.random.default_rng(0)
        for n in (11, 23, 57):
            y = rng.permutation(np.resize([0, 1], n))
            plan = make_folds(y, 5, seed=2)
            sizes = plan.sizes()
            assert max(sizes) - min(sizes) <= 1

    def test_stratified_ratio_within_one_sample(self):
        y = np.array([1] * 60 + [0] * 40)
        plan = make_folds(y, 5, seed=3)
        for f in range(5):
            idx = plan.test_indices(f)
            n_pos = int(np.sum(y[idx] == 1))
            assert abs(n_pos - 12) <= 1
            assert abs((idx.size - n_pos) - 8) <= 1

    def test_partition(self):
        y = np.array([0, 1] * 20)
        plan = make_folds(y, 4, seed=9)
        seen = np.concatenate([plan.test_indices(f) for f in range(4)])
        assert sorted(seen.tolist()) == list(range(40))

    def test_deterministic_in_seed(self):
        y = np.array([0, 1] * 25)
        a = make_folds(y, 5, seed=42).fold_of
        b = make_folds(y, 5, seed=42).fold_of
        c = make_folds(y, 5, seed=43).fold_of
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_groups_never_split(self):
        y = np.array([0, 1] * 10)
        groups = [f"subj{i // 2}" for i in range(20)]
        plan = make_folds(y, 5, seed=4, groups=groups)
        fold_of = plan.fold_of
        for i in range(0, 20, 2):
            assert fold_of[i] == fold_of[i + 1]

    def test_k_greater_than_n_rejected(self):
        with pytest.raises(DataError):
            make_folds([0, 1], 3, seed=0)

    def test_small_class_rejected_for_stratification(self):
        with pytest.raises(DataError):
            make_folds([1] * 9 + [0], 5, seed=0)


class TestGridSearch:
    def _data(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(60, 3))
        y = (X[:, 0] + 0.3 * rng.normal(size=60) > 0).astype(int)
        return X, y

    def test_singleton_grid_returns_it(self):
        X, y = self._data()
        spec = default_spec("logistic_regression", grid={"C": [0.5]})
        folds = make_folds(y, 4, seed=5)
        best, result = grid_search(spec, X, y, folds)
        assert best.hyperparameters["C"] == 0.5
        assert len(result.table) == 1

    def test_picks_the_better_configuration(self):
        # 0 boosting rounds scores everyone at the prior (AUC exactly 0.5);
        # 30 rounds separates this data nearly perfectly
        X, y = self._data()
        spec = default_spec("gradient_boosting", grid={"n_rounds": [0, 30]},
                            hyperparameters={"max_depth": 2})
        folds = make_folds(y, 4, seed=5)
        best, result = grid_search(spec, X, y, folds)
        assert best.hyperparameters["n_rounds"] == 30
        assert result.table[0][1] == pytest.approx(0.5)
        assert result.table[1][1] > 0.9

    def test_matches_exhaustive_recompute(self):
        X, y = self._data()
        spec = default_spec("logistic_regression")  # default C grid
        folds = make_folds(y, 5, seed=6)
        best, result = grid_search(spec, X, y, folds)
        # independent re-evaluation of every cell
        from dataclasses import replace

        from logqc.models import build_model

        recomputed = []
        for c_value in spec.grid["C"]:
            candidate = replace(spec, hyperparameters={"C": c_value}, grid={})
            fold_aucs, _ = cv_scores(lambda: build_model(candidate), X, y, folds)
            recomputed.append((c_value, float(np.mean(fold_aucs))))
        expected_best = max(recomputed, key=lambda t: t[1])
        assert best.hyperparameters["C"] == expected_best[0]
        for (c_value, mean_auc), (_, table_auc, _) in zip(recomputed, result.table):
            assert mean_auc == pytest.approx(table_auc, abs=1e-12)

    def test_tie_keeps_first_in_grid(self):
        X, y = self._data()
        spec = default_spec("logistic_regression", grid={"C": [1.0, 1.0]})
        folds = make_folds(y, 4, seed=5)
        best, _ = grid_search(spec, X, y, folds)
        assert best.hyperparameters["C"] == 1.0
