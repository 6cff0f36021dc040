import filecmp
import json

import numpy as np
import pytest

from logqc.errors import ConfigError
from logqc.log_miner import default_rules
from logqc.store import load_features_csv, load_labels_csv
from logqc.synth import (
    _FLAGQC_MODEL,
    MRIQC_FUNCTIONAL_COLUMNS,
    MRIQC_STRUCTURAL_COLUMNS,
    ShiftProfile,
    SynthConfig,
    generate,
    generate_shifted_pair,
)


class TestTables:
    def test_mriqc_column_counts_and_uniqueness(self):
        assert len(MRIQC_FUNCTIONAL_COLUMNS) == 44
        assert len(set(MRIQC_FUNCTIONAL_COLUMNS)) == 44
        assert len(MRIQC_STRUCTURAL_COLUMNS) == 68
        assert len(set(MRIQC_STRUCTURAL_COLUMNS)) == 68
        assert not set(MRIQC_FUNCTIONAL_COLUMNS) & set(MRIQC_STRUCTURAL_COLUMNS)

    def test_value_model_covers_exactly_the_default_rules(self):
        assert set(_FLAGQC_MODEL) == set(default_rules().names)


class TestGenerate:
    def test_zero_scans_gives_empty_corpus(self, tmp_path):
        paths = generate(SynthConfig(n_scans=0, seed=1), tmp_path / "c")
        assert list(paths.logs_dir.iterdir()) == []
        assert paths.labels_csv.read_text().strip() == "scan_id,label"
        func = load_features_csv(paths.mriqc_functional_csv, "mriqc_functional")
        assert func.n_samples == 0 and func.n_features == 44

    def test_pass_rate_near_binomial_mean(self, tmp_path):
        config = SynthConfig(n_scans=612, pass_rate=0.739, seed=5)
        paths = generate(config, tmp_path / "c")
        labels = load_labels_csv(paths.labels_csv)
        n_pass = sum(labels.values())
        # expected 452; allow four binomial standard deviations (~11 each)
        assert abs(n_pass - 452) <= 44

    def test_deterministic_in_seed(self, tmp_path):
        config = SynthConfig(n_scans=25, seed=9)
        a = generate(config, tmp_path / "a")
        b = generate(config, tmp_path / "b")
        assert a.truth_flagqc_csv.read_text() == b.truth_flagqc_csv.read_text()
        assert a.labels_csv.read_text() == b.labels_csv.read_text()
        assert a.mriqc_functional_csv.read_text() == b.mriqc_functional_csv.read_text()
        match, mismatch, errors = filecmp.cmpfiles(
            a.logs_dir, b.logs_dir, [p.name for p in a.logs_dir.iterdir()], shallow=False
        )
        assert not mismatch and not errors

    def test_different_seed_differs(self, tmp_path):
        a = generate(SynthConfig(n_scans=10, seed=1), tmp_path / "a")
        b = generate(SynthConfig(n_scans=10, seed=2), tmp_path / "b")
        assert a.truth_flagqc_csv.read_text() != b.truth_flagqc_csv.read_text()

    def test_labels_match_planted_class_distributions(self, tmp_path):
        # for a known signal feature, pass and fail means must separate in
        # the planted direction (generator bookkeeping consistency)
        config = SynthConfig(n_scans=400, seed=3,
                             effect_sizes={"flagqc": 3.0, "mriqc_functional": 0.0,
                                           "mriqc_structural": 0.0},
                             missing_step_rate=0.0)
        paths = generate(config, tmp_path / "c")
        meta = json.loads(paths.meta_json.read_text())
        signal = meta["signal_plan"]["flagqc"]
        labels = load_labels_csv(paths.labels_csv)
        ds = load_features_csv(paths.truth_flagqc_csv, "flagqc")
        y = np.array([labels[sid] for sid in ds.scan_ids])
        checked = 0
        for feature, direction in signal.items():
            col = ds.X[:, ds.columns.index(feature)]
            gap = np.nanmean(col[y == 0]) - np.nanmean(col[y == 1])
            assert np.sign(gap) == direction
            checked += 1
        assert checked == 8

    def test_missing_steps_only_on_failures(self, tmp_path):
        config = SynthConfig(n_scans=200, seed=7, missing_step_rate=1.0)
        paths = generate(config, tmp_path / "c")
        labels = load_labels_csv(paths.labels_csv)
        ds = load_features_csv(paths.truth_flagqc_csv, "flagqc")
        runtime_cols = [i for i, c in enumerate(ds.columns) if c.startswith("runtime_")]
        for row, sid in enumerate(ds.scan_ids):
            has_missing_runtime = np.isnan(ds.X[row, runtime_cols]).any()
            if labels[sid] == 1:
                assert not has_missing_runtime
        fails = [row for row, sid in enumerate(ds.scan_ids) if labels[sid] == 0]
        assert any(np.isnan(ds.X[row, runtime_cols]).any() for row in fails)

    def test_invalid_config_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            generate(SynthConfig(n_scans=-1), tmp_path / "c")
        with pytest.raises(ConfigError):
            generate(SynthConfig(n_scans=1, pass_rate=1.0), tmp_path / "c")


class TestShiftedPair:
    def test_zero_shift_pair_is_exchangeable(self, tmp_path):
        config = SynthConfig(n_scans=300, seed=13, missing_step_rate=0.0)
        train, test = generate_shifted_pair(config, tmp_path / "pair")
        meta_a = json.loads(train.meta_json.read_text())
        meta_b = json.loads(test.meta_json.read_text())
        assert meta_a["signal_plan"] == meta_b["signal_plan"]
        assert meta_b["shift"] == {}
        # identical distribution parameters: per-column means agree statistically
        a = load_features_csv(train.mriqc_functional_csv, "mriqc_functional")
        b = load_features_csv(test.mriqc_functional_csv, "mriqc_functional")
        gap = np.abs(a.X.mean(axis=0) - b.X.mean(axis=0))
        pooled_sd = np.sqrt((a.X.std(axis=0) ** 2 + b.X.std(axis=0) ** 2) / 300)
        assert np.all(gap < 5 * pooled_sd + 1e-9)

    def test_shift_moves_only_the_target_group(self, tmp_path):
        config = SynthConfig(
            n_scans=300, seed=13, missing_step_rate=0.0,
            shift={"mriqc_functional": ShiftProfile(offset_sd=4.0)},
        )
        train, test = generate_shifted_pair(config, tmp_path / "pair")
        a_f = load_features_csv(train.mriqc_functional_csv, "mriqc_functional")
        b_f = load_features_csv(test.mriqc_functional_csv, "mriqc_functional")
        a_s = load_features_csv(train.mriqc_structural_csv, "mriqc_structural")
        b_s = load_features_csv(test.mriqc_structural_csv, "mriqc_structural")
        sd_f = a_f.X.std(axis=0)
        moved = (b_f.X.mean(axis=0) - a_f.X.mean(axis=0)) / sd_f
        assert np.all(moved > 3.0)  # 4 sd offset planted
        sd_s = a_s.X.std(axis=0)
        stayed = np.abs(b_s.X.mean(axis=0) - a_s.X.mean(axis=0)) / sd_s
        assert np.all(stayed < 0.5)
