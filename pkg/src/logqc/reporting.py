"""Report rendering and emission: summary tables, CSVs, ROC plots, manifest.

Every artifact is written deterministically (fixed float formatting, sorted
JSON keys, no timestamps), so reruns with the same config and seed produce
byte-identical files and therefore identical manifest hashes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .harness import FEATURE_SET_LABELS, UNSEEN_COLUMN_LABELS, ExperimentReport
from .ioutil import dump_json, sha256_file, sha256_text, write_csv, write_json_atomic, write_text_atomic
from .metrics import auc as auc_fn
from .models import FAMILY_LABELS
from .models.persistence import save_artifact


def format_within_row(feature_set_label: str, family_label: str,
                      n_features: int, max_auc: float) -> str:
    """One summary row in the within-dataset table layout."""
    return f"{feature_set_label} | {family_label} | {n_features} | {max_auc:.2f}"


def within_summary_text(report: ExperimentReport) -> str:
    lines = [
        f"Within-dataset forward-selection results ({report.train_study})",
        "Feature Set | Classifier w/ Max AUC | # of Features @ Max AUC | Max AUC",
    ]
    best = report.best_cells()
    for feature_set in report.config.get("feature_sets", []):
        cell = best.get(feature_set)
        if cell is None:
            continue
        lines.append(format_within_row(
            FEATURE_SET_LABELS[feature_set], FAMILY_LABELS[cell.family],
            cell.best_k, cell.max_auc,
        ))
    if report.cells:
        lines.append("")
        lines.append("All feature-set x family cells:")
        for cell in report.cells:
            lines.append(format_within_row(
                FEATURE_SET_LABELS[cell.feature_set], FAMILY_LABELS[cell.family],
                cell.best_k, cell.max_auc,
            ))
    return "\n".join(lines) + "\n"


def metrics_text(metrics) -> str:
    """A MetricsReport as a small aligned text table."""
    d = metrics.to_dict()
    rows = [
        ("AUC", f"{d['auc']:.2f}"),
        ("Accuracy", f"{d['accuracy'] * 100.0:.2f}%"),
        ("Precision", f"{d['precision']:.2f}"),
        ("Recall", f"{d['recall']:.2f}"),
        ("Threshold", f"{d['threshold']:g}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)} | {v}" for k, v in rows) + "\n"


def render_unseen_table(columns: list[tuple[str, dict]]) -> str:
    """The unseen-study classification-metrics table (four-column layout).

    `columns` is an ordered list of (column label, values) where values has
    auc, accuracy, precision, recall as fractions.
    """
    header = ["Metric"] + [label for label, _ in columns]
    rows = [
        ["AUC"] + [f"{v['auc']:.2f}" for _, v in columns],
        ["Accuracy"] + [f"{v['accuracy'] * 100.0:.2f}%" for _, v in columns],
        ["Precision"] + [f"{v['precision']:.2f}" for _, v in columns],
        ["Recall"] + [f"{v['recall']:.2f}" for _, v in columns],
    ]
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    out = ["Classification Metrics"]
    out.append(" | ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for row in rows:
        out.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"


def unseen_summary_text(report: ExperimentReport) -> str:
    lines = [
        f"Unseen-study prediction: train = {report.train_study}, test = {report.test_study}",
        "",
    ]
    columns = []
    for result in report.unseen:
        columns.append((UNSEEN_COLUMN_LABELS[result.feature_set], result.metrics.to_dict()))
        lines.append(
            f"{UNSEEN_COLUMN_LABELS[result.feature_set]}: {FAMILY_LABELS[result.family]} "
            f"with {len(result.selected_features)} features "
            f"(within-train max AUC {result.within_train_auc:.2f})"
        )
    lines.append("")
    if columns:
        lines.append(render_unseen_table(columns))
    return "\n".join(lines)


def roc_svg(roc, width: int = 420, height: int = 420, margin: int = 45) -> str:
    """Minimal deterministic SVG rendering of a ROC curve."""

    def sx(f):
        return margin + f * (width - 2 * margin)

    def sy(t):
        return height - margin - t * (height - 2 * margin)

    pts = " ".join(f"{sx(f):.2f},{sy(t):.2f}" for f, t in zip(roc.fpr, roc.tpr))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(1):.2f}" y2="{sy(0):.2f}" stroke="black"/>',
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(0):.2f}" y2="{sy(1):.2f}" stroke="black"/>',
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(1):.2f}" y2="{sy(1):.2f}" '
        f'stroke="lightgray" stroke-dasharray="4 3"/>',
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" '
        f'font-family="monospace" font-size="12">FPR</text>',
        f'<text x="12" y="{height / 2:.0f}" text-anchor="middle" font-family="monospace" '
        f'font-size="12" transform="rotate(-90 12 {height / 2:.0f})">TPR</text>',
        f'<text x="{width - margin}" y="{margin - 10}" text-anchor="end" '
        f'font-family="monospace" font-size="12">AUC = {roc.auc:.3f}</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def _write_predictions_csv(path, trace, scan_ids, labels):
    rows = []
    for step_no, step in enumerate(trace.steps, start=1):
        for fold, test_idx, scores in step.fold_scores:
            for i, score in zip(test_idx, scores):
                rows.append((step_no, fold, scan_ids[i], int(labels[i]), float(score)))
    write_csv(path, ["step", "fold", "scan_id", "label", "score"], rows)


def recompute_trace_aucs(predictions_csv) -> dict:
    """Recompute per-step mean AUC from a persisted predictions CSV."""
    import csv as _csv

    by_step: dict[int, dict[int, tuple[list, list]]] = {}
    with open(predictions_csv, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        for row in reader:
            step = int(row["step"])
            fold = int(row["fold"])
            labels, scores = by_step.setdefault(step, {}).setdefault(fold, ([], []))
            labels.append(int(row["label"]))
            scores.append(float(row["score"]))
    means = {}
    for step, folds in by_step.items():
        fold_aucs = [auc_fn(np.asarray(s), np.asarray(l)) for l, s in folds.values()]
        means[step] = float(np.mean(fold_aucs))
    return means


def _grid_cell_name(feature_set: str, family: str) -> str:
    return f"{feature_set}__{family}"


def _config_snapshot(config: dict | None) -> dict | None:
    # out_dir does not affect results; dropping it keeps manifests identical
    # when the same experiment is written to two locations
    if config is None:
        return None
    return {k: v for k, v in config.items() if k != "out_dir"}


def emit_report(report: ExperimentReport, outdir) -> dict:
    """Write all report artifacts plus a manifest of content hashes.

    Returns the manifest dictionary. The manifest is also written last as
    manifest.json; identical (config, seed) runs produce identical hashes.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    def emitted(name: str):
        files.append(name)
        return outdir / name

    write_text_atomic(emitted("config.json"), dump_json({
        "config": _config_snapshot(report.config),
        "test_config": _config_snapshot(report.test_config),
        "kind": report.kind,
        "seed": report.seed,
    }))

    summary = within_summary_text(report) if report.kind == "within" else unseen_summary_text(report)
    if report.kind == "unseen" and report.cells:
        summary += "\nWithin-train selection summary:\n" + within_summary_text(report)
    write_text_atomic(emitted("summary.txt"), summary)

    summary_rows = [
        (cell.feature_set, cell.family, cell.best_k, cell.max_auc)
        for cell in report.cells
    ]
    write_csv(emitted("summary.csv"),
              ["feature_set", "family", "n_features_at_max", "max_auc"], summary_rows)

    for feature_set, screen in report.screens.items():
        write_csv(emitted(f"hsic_{feature_set}.csv"), ["feature", "beta"], screen.csv_rows())

    max_folds = max((len(s.fold_aucs) for c in report.cells for s in c.trace.steps), default=0)
    for cell in report.cells:
        name = _grid_cell_name(cell.feature_set, cell.family)
        header = ["step", "feature", "mean_auc"] + [f"fold{j}_auc" for j in range(max_folds)]
        write_csv(emitted(f"selection_{name}.csv"), header, cell.trace.csv_rows())
        _write_predictions_csv(emitted(f"predictions_{name}.csv"), cell.trace,
                               report.scan_ids, report.labels)

    for result in report.unseen:
        fs = result.feature_set
        write_csv(emitted(f"roc_{fs}.csv"), ["fpr", "tpr", "threshold"], result.roc.csv_rows())
        write_text_atomic(emitted(f"roc_{fs}.svg"), roc_svg(result.roc))
        write_text_atomic(emitted(f"metrics_{fs}.json"), dump_json(result.metrics.to_dict()))
        rows = [
            (sid, int(label), float(score))
            for sid, label, score in zip(result.scan_ids, result.labels, result.scores)
        ]
        write_csv(emitted(f"predictions_unseen_{fs}.csv"), ["scan_id", "label", "score"], rows)
        save_artifact(result.artifact, emitted(f"model_{fs}.json"))

    write_text_atomic(emitted("diagnostics.txt"),
                      "\n".join(report.diagnostics) + ("\n" if report.diagnostics else ""))

    report_doc = {
        "kind": report.kind,
        "seed": report.seed,
        "train_study": report.train_study,
        "test_study": report.test_study,
        "cells": [
            {
                "feature_set": cell.feature_set,
                "family": cell.family,
                "tuned_params": cell.tuned_params,
                "best_k": cell.best_k,
                "max_auc": cell.max_auc,
                "steps": [
                    {"feature": s.feature, "mean_auc": s.mean_auc, "fold_aucs": s.fold_aucs}
                    for s in cell.trace.steps
                ],
            }
            for cell in report.cells
        ],
        "unseen": [
            {
                "feature_set": r.feature_set,
                "family": r.family,
                "selected_features": r.selected_features,
                "tuned_params": r.tuned_params,
                "model_hash": r.model_hash,
                "within_train_auc": r.within_train_auc,
                "metrics": r.metrics.to_dict(),
            }
            for r in report.unseen
        ],
        "diagnostics": report.diagnostics,
    }
    write_text_atomic(emitted("report.json"), dump_json(report_doc))

    manifest = {
        "kind": report.kind,
        "seed": report.seed,
        "config_hash": sha256_text(dump_json({"config": _config_snapshot(report.config),
                                              "test_config": _config_snapshot(report.test_config)})),
        "files": {name: sha256_file(outdir / name) for name in sorted(files)},
    }
    write_json_atomic(outdir / "manifest.json", manifest)
    return manifest
