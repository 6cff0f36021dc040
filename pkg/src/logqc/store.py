"""Tabular model for feature matrices, labels, study tags and provenance.

Missing cells are NaN inside Dataset.X and empty cells on disk. Datasets are
treated as immutable: every operation returns a new Dataset.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .ioutil import Diagnostics, format_number, write_csv
from .models.base import Estimator

GROUP_FLAGQC = "flagqc"
GROUP_MRIQC_FUNCTIONAL = "mriqc_functional"
GROUP_MRIQC_STRUCTURAL = "mriqc_structural"
FEATURE_GROUPS = (GROUP_FLAGQC, GROUP_MRIQC_FUNCTIONAL, GROUP_MRIQC_STRUCTURAL)

PASS, FAIL = 1, 0
_LABEL_TOKENS = {"pass": PASS, "fail": FAIL}


@dataclass
class Dataset:
    """Samples x features with study tags, per-column group provenance, labels."""

    scan_ids: list[str]
    columns: list[str]
    X: np.ndarray
    groups: dict = field(default_factory=dict)
    study: list[str] | str = ""
    y: np.ndarray | None = None
    subject_ids: list[str] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.scan_ids), len(self.columns))
        if isinstance(self.study, str):
            self.study = [self.study] * len(self.scan_ids)
        if len(self.study) != len(self.scan_ids):
            raise DataError("study tags must align with scan_ids")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.int8)
            if self.y.shape != (len(self.scan_ids),):
                raise DataError("labels must align with scan_ids")
        if np.isinf(self.X).any():
            raise DataError("feature matrix contains infinities; missing cells must be NaN")
        missing_group = [c for c in self.columns if c not in self.groups]
        if missing_group:
            raise DataError(f"columns without a feature group: {missing_group[:5]}")
        per_study: dict[str, set] = {}
        for sid, st in zip(self.scan_ids, self.study):
            seen = per_study.setdefault(st, set())
            if sid in seen:
                raise DataError(f"duplicate scan_id {sid!r} within study {st!r}")
            seen.add(sid)

    @property
    def n_samples(self) -> int:
        return len(self.scan_ids)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"unknown column {name!r}") from None

    def select_columns(self, names: list[str]) -> "Dataset":
        idx = [self.column_index(n) for n in names]
        return replace(
            self,
            columns=list(names),
            X=self.X[:, idx],
            groups={n: self.groups[n] for n in names},
        )

    def columns_in_groups(self, groups) -> list[str]:
        wanted = set(groups)
        return [c for c in self.columns if self.groups[c] in wanted]

    def select_rows(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return replace(
            self,
            scan_ids=[self.scan_ids[i] for i in indices],
            X=self.X[indices],
            study=[self.study[i] for i in indices],
            y=None if self.y is None else self.y[indices],
            subject_ids=None if self.subject_ids is None else [self.subject_ids[i] for i in indices],
        )

    def to_csv(self, path) -> None:
        rows = []
        for i, sid in enumerate(self.scan_ids):
            rows.append([sid] + [format_number(v) if not math.isnan(v) else "" for v in self.X[i]])
        write_csv(path, ["scan_id"] + list(self.columns), rows)


def load_features_csv(path, group: str, study: str = "",
                      diagnostics: Diagnostics | None = None) -> Dataset:
    """Load a wide feature CSV (scan_id + numeric columns) as one group fragment."""
    if group not in FEATURE_GROUPS:
        raise DataError(f"unknown feature group {group!r}; expected one of {FEATURE_GROUPS}")
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path} is empty") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read features CSV {path}: {exc}") from exc
    if "scan_id" not in header:
        raise DataError(f"{path} has no scan_id column")
    id_col = header.index("scan_id")
    columns = [c for i, c in enumerate(header) if i != id_col]
    scan_ids: list[str] = []
    data = np.full((len(rows), len(columns)), np.nan)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path} row {r + 2}: expected {len(header)} cells, got {len(row)}")
        scan_ids.append(row[id_col])
        c = 0
        for i, cell in enumerate(row):
            if i == id_col:
                continue
            cell = cell.strip()
            if cell:
                try:
                    value = float(cell)
                except ValueError:
                    value = float("nan")
                    if diagnostics is not None:
                        diagnostics.add(row[id_col], f"{columns[c]}: non-numeric cell {cell!r}")
                if math.isinf(value):
                    if diagnostics is not None:
                        diagnostics.add(row[id_col], f"{columns[c]}: non-finite cell {cell!r}")
                    value = float("nan")
                data[r, c] = value
            c += 1
    if len(set(scan_ids)) != len(scan_ids):
        raise DataError(f"{path} contains duplicate scan_ids")
    return Dataset(
        scan_ids=scan_ids,
        columns=columns,
        X=data,
        groups={c: group for c in columns},
        study=study or path.stem,
    )


def merge(*fragments: Dataset, diagnostics: Diagnostics | None = None) -> Dataset:
    """Column-wise join of fragments on scan_id (outer join, rows sorted by id).

    A sample absent from a fragment gets Missing for that fragment's columns.
    Labels are not carried through; attach them after merging.
    """
    if not fragments:
        raise DataError("merge needs at least one fragment")
    studies = {st for frag in fragments for st in frag.study}
    if len(studies) > 1:
        raise DataError(f"merge requires a single study, got {sorted(studies)}")
    study = studies.pop() if studies else ""
    columns: list[str] = []
    groups: dict = {}
    for frag in fragments:
        for c in frag.columns:
            if c in groups:
                raise DataError(f"column {c!r} appears in more than one fragment")
            columns.append(c)
            groups[c] = frag.groups[c]
    all_ids = sorted({sid for frag in fragments for sid in frag.scan_ids})
    row_of = {sid: i for i, sid in enumerate(all_ids)}
    X = np.full((len(all_ids), len(columns)), np.nan)
    col_offset = 0
    for frag in fragments:
        rows = [row_of[sid] for sid in frag.scan_ids]
        X[np.asarray(rows, dtype=np.int64), col_offset : col_offset + frag.n_features] = frag.X
        if diagnostics is not None and len(rows) < len(all_ids):
            absent = len(all_ids) - len(rows)
            tag = frag.columns[0] if frag.columns else "empty"
            diagnostics.add("merge", f"{absent} scan(s) missing from the {tag} fragment")
        col_offset += frag.n_features
    return Dataset(scan_ids=all_ids, columns=columns, X=X, groups=groups, study=study)


def load_labels_csv(path) -> dict:
    """Two-column CSV scan_id,label with pass/fail tokens -> {scan_id: 0/1}."""
    path = Path(path)
    labels: dict[str, int] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, start=1):
                if not row or not "".join(row).strip():
                    continue
                if lineno == 1 and row[0].strip().lower() == "scan_id":
                    continue
                if len(row) < 2:
                    raise DataError(f"{path} line {lineno}: expected scan_id,label")
                sid, token = row[0].strip(), row[1].strip().lower()
                if token not in _LABEL_TOKENS:
                    raise DataError(f"{path} line {lineno}: unknown label token {row[1]!r}")
                if sid in labels:
                    raise DataError(f"{path} line {lineno}: duplicate scan_id {sid!r}")
                labels[sid] = _LABEL_TOKENS[token]
    except OSError as exc:
        raise DataError(f"cannot read labels CSV {path}: {exc}") from exc
    return labels


def attach_labels(dataset: Dataset, labels, diagnostics: Diagnostics | None = None) -> Dataset:
    """Attach pass/fail labels; rows without a label are dropped with a diagnostic."""
    if not isinstance(labels, dict):
        labels = load_labels_csv(labels)
    keep = []
    y = []
    for i, sid in enumerate(dataset.scan_ids):
        if sid in labels:
            keep.append(i)
            y.append(labels[sid])
        elif diagnostics is not None:
            diagnostics.add(sid, "no label; row dropped")
    subset = dataset.select_rows(np.asarray(keep, dtype=np.int64))
    return replace(subset, y=np.asarray(y, dtype=np.int8))


def rater_agreement(labels_a, labels_b) -> float:
    """Fraction of scans on which two raters issued the same label."""
    if isinstance(labels_a, dict) or isinstance(labels_b, dict):
        if set(labels_a) != set(labels_b):
            raise DataError("rater label files cover different scan_ids")
        keys = sorted(labels_a)
        a = np.asarray([labels_a[k] for k in keys])
        b = np.asarray([labels_b[k] for k in keys])
    else:
        a = np.asarray(labels_a)
        b = np.asarray(labels_b)
        if a.shape != b.shape:
            raise DataError("rater label vectors differ in length")
    if a.size == 0:
        raise DataError("no labels to compare")
    return float(np.mean(a == b))


class Preprocessor(Estimator):
    """Median imputation followed by z-scoring, fitted on a training split only.

    Columns that are entirely Missing in the training split are dropped and
    recorded in `dropped_columns_`. Constant columns transform to all zeros.
    """

    def __init__(self):
        pass

    def fit(self, dataset: Dataset) -> "Preprocessor":
        if dataset.n_samples == 0:
            raise DataError("cannot fit a preprocessor on an empty dataset")
        X = dataset.X
        observed = ~np.isnan(X)
        keep = observed.any(axis=0)
        self.dropped_columns_ = [c for c, k in zip(dataset.columns, keep) if not k]
        cols = np.flatnonzero(keep)
        sub = X[:, cols]
        medians = np.nanmedian(sub, axis=0)
        imputed = np.where(np.isnan(sub), medians, sub)
        self.columns_ = [dataset.columns[i] for i in cols]
        self.medians_ = medians
        self.means_ = imputed.mean(axis=0)
        self.stds_ = imputed.std(axis=0)
        return self

    def transform(self, dataset: Dataset) -> Dataset:
        if not hasattr(self, "columns_"):
            raise DataError("preprocessor is not fitted")
        aligned = dataset.select_columns(self.columns_)
        X = aligned.X
        X = np.where(np.isnan(X), self.medians_, X)
        scale = np.where(self.stds_ > 0, self.stds_, 1.0)
        Z = np.where(self.stds_ > 0, (X - self.means_) / scale, 0.0)
        return replace(aligned, X=Z)

    def fit_transform(self, dataset: Dataset) -> Dataset:
        return self.fit(dataset).transform(dataset)

    def to_payload(self) -> dict:
        return {
            "columns": list(self.columns_),
            "medians": self.medians_.tolist(),
            "means": self.means_.tolist(),
            "stds": self.stds_.tolist(),
            "dropped_columns": list(self.dropped_columns_),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Preprocessor":
        pre = cls()
        pre.columns_ = list(payload["columns"])
        pre.medians_ = np.asarray(payload["medians"], dtype=np.float64)
        pre.means_ = np.asarray(payload["means"], dtype=np.float64)
        pre.stds_ = np.asarray(payload["stds"], dtype=np.float64)
        pre.dropped_columns_ = list(payload.get("dropped_columns", []))
        return pre
