"""End-to-end experiment protocols.

Within-dataset: per feature set and model family, screen features with the
kernelized Lasso, tune hyperparameters with grid-search CV, then run forward
selection and record the mean-AUC-per-step curve.

Unseen-study: pick each feature set's best family from the within-train
results, finish selection and tuning on the training corpus only, fit on all
training rows, and only then read the test corpus to evaluate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._rng import child_seed
from .errors import ConfigError, DataError
from .ioutil import Diagnostics
from .log_miner import RuleSet, extract_corpus, load_rules
from .metrics import (
    MetricsReport,
    RocCurve,
    grid_search,
    make_folds,
    roc_curve,
    thresholded_metrics,
)
from .models import DEFAULT_GRIDS, FAMILIES, ModelSpec, build_model, default_spec
from .models.persistence import ModelArtifact, fitted_artifact
from .selection import SelectionTrace, forward_select, hsic_screen
from .store import (
    GROUP_FLAGQC,
    GROUP_MRIQC_FUNCTIONAL,
    GROUP_MRIQC_STRUCTURAL,
    Dataset,
    Preprocessor,
    attach_labels,
    load_features_csv,
    merge,
)

FEATURE_SET_GROUPS = {
    "flagqc": (GROUP_FLAGQC,),
    "mriqc_functional": (GROUP_MRIQC_FUNCTIONAL,),
    "mriqc_structural": (GROUP_MRIQC_STRUCTURAL,),
    "all": (GROUP_FLAGQC, GROUP_MRIQC_FUNCTIONAL, GROUP_MRIQC_STRUCTURAL),
}

FEATURE_SET_LABELS = {
    "flagqc": "FLAG-QC",
    "mriqc_functional": "MRIQC, Functional",
    "mriqc_structural": "MRIQC, Structural",
    "all": "All Features",
}

UNSEEN_COLUMN_LABELS = {
    "flagqc": "FLAG-QC Logs",
    "mriqc_functional": "MRIQC Functional",
    "mriqc_structural": "MRIQC Structural",
    "all": "All Features",
}


@dataclass
class ExperimentConfig:
    """Everything a protocol run needs; the seed is mandatory."""

    corpus: str
    seed: int
    out_dir: str | None = None
    feature_sets: list = field(default_factory=lambda: list(FEATURE_SET_GROUPS))
    families: list = field(default_factory=lambda: list(FAMILIES))
    k_folds: int = 5
    rules: str = "default"
    hsic_cap: int = 30
    hsic_sigma: float = 1.0
    hsic_lambdas: int = 10
    max_features: int = 20
    params: dict = field(default_factory=dict)  # family -> fixed hyperparameters
    grids: dict | None = None  # family -> grid; None = package defaults
    threshold: float = 0.5
    n_jobs: int = 1
    group_aware: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.seed is None:
            raise ConfigError("an explicit seed is required for reproducibility")
        if not Path(self.corpus).exists():
            raise ConfigError(f"corpus path {self.corpus} does not exist")
        unknown = [fs for fs in self.feature_sets if fs not in FEATURE_SET_GROUPS]
        if unknown:
            raise ConfigError(f"unknown feature sets {unknown}; expected {list(FEATURE_SET_GROUPS)}")
        unknown = [f for f in self.families if f not in FAMILIES]
        if unknown:
            raise ConfigError(f"unknown model families {unknown}; expected {list(FAMILIES)}")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be at least 2")
        return self

    def to_dict(self) -> dict:
        return {
            "corpus": str(self.corpus),
            "seed": self.seed,
            "out_dir": None if self.out_dir is None else str(self.out_dir),
            "feature_sets": list(self.feature_sets),
            "families": list(self.families),
            "k_folds": self.k_folds,
            "rules": str(self.rules),
            "hsic_cap": self.hsic_cap,
            "hsic_sigma": self.hsic_sigma,
            "hsic_lambdas": self.hsic_lambdas,
            "max_features": self.max_features,
            "params": self.params,
            "grids": self.grids,
            "threshold": self.threshold,
            "n_jobs": self.n_jobs,
            "group_aware": self.group_aware,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "corpus" not in data:
            raise ConfigError("config is missing 'corpus'")
        if "seed" not in data:
            raise ConfigError("config is missing 'seed'")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


def vectors_to_dataset(vectors, rules: RuleSet, study: str) -> Dataset:
    """Extraction output as a FLAG-QC Dataset fragment (Missing -> NaN)."""
    names = rules.names
    X = np.full((len(vectors), len(names)), np.nan)
    for i, vec in enumerate(vectors):
        for j, name in enumerate(names):
            value = vec.values.get(name)
            if value is not None:
                X[i, j] = value
    return Dataset(
        scan_ids=[v.scan_id for v in vectors],
        columns=list(names),
        X=X,
        groups={n: GROUP_FLAGQC for n in names},
        study=study,
    )


def load_corpus(corpus_dir, rules: RuleSet | str = "default",
                diagnostics: Diagnostics | None = None) -> Dataset:
    """Load a corpus directory into one labeled Dataset.

    Expected layout: logs/ (FLAG-QC source), labels.csv, and optional
    mriqc_functional.csv / mriqc_structural.csv tables; subjects.csv
    (scan_id,subject_id) enables group-aware folding.
    """
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise DataError(f"corpus directory {corpus_dir} does not exist")
    if isinstance(rules, str):
        rules = load_rules(rules)
    study = corpus_dir.name
    fragments = []
    logs_dir = corpus_dir / "logs"
    if logs_dir.is_dir():
        vectors = extract_corpus(logs_dir, rules, diagnostics)
        fragments.append(vectors_to_dataset(vectors, rules, study))
    for filename, group in (
        ("mriqc_functional.csv", GROUP_MRIQC_FUNCTIONAL),
        ("mriqc_structural.csv", GROUP_MRIQC_STRUCTURAL),
    ):
        path = corpus_dir / filename
        if path.is_file():
            fragments.append(load_features_csv(path, group, study=study, diagnostics=diagnostics))
    if not fragments:
        raise DataError(f"{corpus_dir} contains no logs/ directory and no feature tables")
    dataset = merge(*fragments, diagnostics=diagnostics)
    labels_path = corpus_dir / "labels.csv"
    if not labels_path.is_file():
        raise DataError(f"{corpus_dir} has no labels.csv")
    dataset = attach_labels(dataset, labels_path, diagnostics)
    subjects_path = corpus_dir / "subjects.csv"
    if subjects_path.is_file():
        mapping = {}
        for line in subjects_path.read_text(encoding="utf-8").splitlines()[1:]:
            if line.strip():
                sid, _, subject = line.partition(",")
                mapping[sid.strip()] = subject.strip()
        dataset = replace(dataset, subject_ids=[mapping.get(s, s) for s in dataset.scan_ids])
    return dataset


def _family_spec(config: ExperimentConfig, family: str, *seed_labels) -> ModelSpec:
    params = dict(config.params.get(family, {}))
    if config.grids is None:
        grid = DEFAULT_GRIDS[family]
    else:
        grid = config.grids.get(family, {})
    return default_spec(family, seed=child_seed(config.seed, *seed_labels),
                        hyperparameters=params, grid=grid)


@dataclass
class WithinCell:
    """Forward-selection outcome for one feature set x family pair."""

    feature_set: str
    family: str
    tuned_params: dict
    trace: SelectionTrace

    @property
    def max_auc(self) -> float:
        return self.trace.max_auc

    @property
    def best_k(self) -> int:
        return self.trace.best_k


@dataclass
class UnseenResult:
    """Unseen-study evaluation for one feature set."""

    feature_set: str
    family: str
    selected_features: list
    tuned_params: dict
    model_hash: str
    artifact: ModelArtifact
    roc: RocCurve
    metrics: MetricsReport
    scan_ids: list
    labels: np.ndarray
    scores: np.ndarray
    within_train_auc: float


@dataclass
class ExperimentReport:
    """Everything a protocol run produced, ready for emission."""

    kind: str  # "within" | "unseen"
    config: dict
    seed: int
    train_study: str
    scan_ids: list
    labels: np.ndarray
    screens: dict = field(default_factory=dict)  # feature_set -> HsicResult
    cells: list = field(default_factory=list)
    unseen: list = field(default_factory=list)
    test_study: str | None = None
    test_config: dict | None = None
    diagnostics: list = field(default_factory=list)

    def best_cells(self) -> dict:
        """Per feature set, the cell with the highest max AUC (family order on ties)."""
        best: dict[str, WithinCell] = {}
        for cell in self.cells:
            cur = best.get(cell.feature_set)
            if cur is None or cell.max_auc > cur.max_auc:
                best[cell.feature_set] = cell
        return best


def _screen_and_candidates(config, Z, diagnostics, feature_set):
    screen = hsic_screen(
        Z.X, Z.y, Z.columns, cap=config.hsic_cap, sigma=config.hsic_sigma,
        n_lambdas=config.hsic_lambdas,
    )
    candidates = list(screen.selected)
    if not candidates:
        diagnostics.add(feature_set, "HSIC screen selected nothing; using every column")
        candidates = list(Z.columns)
    return screen, candidates


def _fold_groups(config, dataset):
    if config.group_aware and dataset.subject_ids is not None:
        return dataset.subject_ids
    return None


def run_within_dataset(config: ExperimentConfig) -> ExperimentReport:
    """Within-dataset cross-validation over feature sets x model families."""
    config.validate()
    diags = Diagnostics()
    rules = load_rules(config.rules)
    dataset = load_corpus(config.corpus, rules, diags)
    report = ExperimentReport(
        kind="within",
        config=config.to_dict(),
        seed=config.seed,
        train_study=Path(config.corpus).name,
        scan_ids=list(dataset.scan_ids),
        labels=dataset.y,
    )
    for feature_set in config.feature_sets:
        cols = dataset.columns_in_groups(FEATURE_SET_GROUPS[feature_set])
        if not cols:
            diags.add(feature_set, "feature set unavailable in this corpus; skipped")
            continue
        sub = dataset.select_columns(cols)
        pre = Preprocessor().fit(sub)
        for dropped in pre.dropped_columns_:
            diags.add(feature_set, f"column {dropped} entirely missing; dropped")
        Z = pre.transform(sub)
        screen, candidates = _screen_and_candidates(config, Z, diags, feature_set)
        report.screens[feature_set] = screen
        folds = make_folds(Z.y, config.k_folds, child_seed(config.seed, "folds", feature_set),
                           groups=_fold_groups(config, Z))
        cand_idx = [Z.columns.index(c) for c in candidates]
        for family in config.families:
            spec = _family_spec(config, family, "model", feature_set, family)
            if spec.grid:
                spec, _ = grid_search(spec, Z.X[:, cand_idx], Z.y, folds)
            trace = forward_select(
                Z.X, Z.y, Z.columns, candidates, spec,
                k_folds=config.k_folds, max_features=config.max_features,
                seed=config.seed, folds=folds, n_jobs=config.n_jobs,
            )
            report.cells.append(WithinCell(
                feature_set=feature_set,
                family=family,
                tuned_params=dict(spec.hyperparameters),
                trace=trace,
            ))
    report.diagnostics = list(diags)
    return report


def train_unseen_models(train_config: ExperimentConfig,
                        within: ExperimentReport | None = None):
    """Training half of the unseen-study protocol; never touches test data.

    Returns (within_report, trained) where trained maps feature_set to
    (artifact, preprocessor, selected feature names).
    """
    train_config.validate()
    if within is None:
        within = run_within_dataset(train_config)
    diags = Diagnostics()
    for line in within.diagnostics:
        diags.messages.append(line)
    rules = load_rules(train_config.rules)
    train_ds = load_corpus(train_config.corpus, rules)
    trained: dict[str, tuple] = {}
    best = within.best_cells()
    for feature_set in train_config.feature_sets:
        cell = best.get(feature_set)
        if cell is None:
            diags.add(feature_set, "no within-train results; skipped")
            continue
        cols = train_ds.columns_in_groups(FEATURE_SET_GROUPS[feature_set])
        sub = train_ds.select_columns(cols)
        pre = Preprocessor().fit(sub)
        Z = pre.transform(sub)
        selected = cell.trace.selected_features()
        sel_idx = [Z.columns.index(c) for c in selected]
        folds = make_folds(Z.y, train_config.k_folds,
                           child_seed(train_config.seed, "final-folds", feature_set),
                           groups=_fold_groups(train_config, Z))
        spec = _family_spec(train_config, cell.family, "final-model", feature_set)
        if spec.grid:
            spec, _ = grid_search(spec, Z.X[:, sel_idx], Z.y, folds)
        model = build_model(spec).fit(Z.X[:, sel_idx], Z.y)
        artifact = fitted_artifact(
            spec, model, selected,
            preprocessor=pre.to_payload(),
            metadata={
                "train_study": Path(train_config.corpus).name,
                "feature_set": feature_set,
                "seed": train_config.seed,
                "k_folds": train_config.k_folds,
                "within_train_max_auc": cell.max_auc,
                "within_train_best_k": cell.best_k,
            },
        )
        trained[feature_set] = (artifact, pre, selected, cell)
    within.diagnostics = list(diags)
    return within, trained


def evaluate_unseen(trained: dict, test_config: ExperimentConfig,
                    within: ExperimentReport, train_config: ExperimentConfig) -> ExperimentReport:
    """Evaluation half of the unseen-study protocol: first read of test data."""
    diags = Diagnostics()
    for line in within.diagnostics:
        diags.messages.append(line)
    rules = load_rules(train_config.rules)
    test_ds = load_corpus(test_config.corpus, rules)
    report = ExperimentReport(
        kind="unseen",
        config=train_config.to_dict(),
        test_config=test_config.to_dict(),
        seed=train_config.seed,
        train_study=Path(train_config.corpus).name,
        test_study=Path(test_config.corpus).name,
        scan_ids=within.scan_ids,
        labels=within.labels,
        screens=within.screens,
        cells=within.cells,
    )
    for feature_set, (artifact, pre, selected, cell) in trained.items():
        missing = [c for c in pre.columns_ if c not in test_ds.columns]
        if missing:
            diags.add(feature_set,
                      f"test corpus lacks {len(missing)} training columns (e.g. {missing[:3]}); skipped")
            continue
        Z_test = pre.transform(test_ds)
        sel_idx = [Z_test.columns.index(c) for c in selected]
        model = artifact.model()
        scores = model.predict_proba(Z_test.X[:, sel_idx])
        roc = roc_curve(scores, Z_test.y)
        metrics = thresholded_metrics(scores, Z_test.y, train_config.threshold)
        report.unseen.append(UnseenResult(
            feature_set=feature_set,
            family=artifact.spec.family,
            selected_features=list(selected),
            tuned_params=dict(artifact.spec.hyperparameters),
            model_hash=artifact.content_hash(),
            artifact=artifact,
            roc=roc,
            metrics=metrics,
            scan_ids=list(Z_test.scan_ids),
            labels=Z_test.y,
            scores=scores,
            within_train_auc=cell.max_auc,
        ))
    report.diagnostics = list(diags)
    return report


def run_unseen_study(train_config: ExperimentConfig,
                     test_config: ExperimentConfig) -> ExperimentReport:
    """Full unseen-study protocol: train on one corpus, evaluate on another."""
    test_config.validate()
    within, trained = train_unseen_models(train_config)
    return evaluate_unseen(trained, test_config, within, train_config)
