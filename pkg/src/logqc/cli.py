"""Command-line entry point: one thin subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
failure. Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


from . import __version__
from ._rng import child_seed
from .errors import ConfigError, DataError, LogQcError, RuleSpecError
from .harness import (
    FEATURE_SET_GROUPS,
    ExperimentConfig,
    run_unseen_study,
    run_within_dataset,
)
from .ioutil import Diagnostics, dump_json, sha256_file, write_csv, write_json_atomic, write_text_atomic
from .log_miner import extract_corpus, features_to_csv, load_rules
from .metrics import grid_search, make_folds, roc_curve, thresholded_metrics
from .models import FAMILIES, build_model, default_spec
from .models.persistence import fitted_artifact, load_artifact, save_artifact
from .reporting import emit_report, metrics_text, render_unseen_table, roc_svg
from .selection import forward_select, hsic_screen
from .store import FEATURE_GROUPS, Preprocessor, attach_labels, load_features_csv, merge
from .synth import ShiftProfile, SynthConfig, generate, generate_shifted_pair


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 and defaults in --help."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_out() -> str:
    return os.environ.get("LOGQC_OUT", ".")


def _parse_kv_list(items, cast, what):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"bad {what} {item!r}; expected NAME=VALUE")
        out[key.strip()] = cast(value.strip())
    return out


def _parse_shift(items):
    shifts = {}
    for item in items or []:
        group, sep, body = item.partition(":")
        if not sep:
            raise ConfigError(f"bad --shift {item!r}; expected GROUP:key=val,key=val")
        fields = _parse_kv_list(body.split(","), float, "--shift field")
        shifts[group.strip()] = ShiftProfile(**fields)
    return shifts


def _parse_json_flag(text, what):
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad JSON for {what}: {exc}") from exc


def _load_feature_table(features_path, labels_path, group="flagqc", diagnostics=None):
    dataset = load_features_csv(features_path, group, diagnostics=diagnostics)
    if labels_path:
        dataset = attach_labels(dataset, labels_path, diagnostics)
    return dataset


# ---------------------------------------------------------------- subcommands


def _cmd_synth(args) -> int:
    config = SynthConfig(
        n_scans=args.n,
        pass_rate=args.pass_rate,
        missing_step_rate=args.missing_step_rate,
        seed=args.seed,
        shift=_parse_shift(args.shift),
    )
    if args.effect:
        config.effect_sizes.update(_parse_kv_list(args.effect, float, "--effect"))
    if args.signal_features:
        config.n_signal_features.update(_parse_kv_list(args.signal_features, int, "--signal-features"))
    if args.shifted:
        train, test = generate_shifted_pair(config, args.out)
        print(f"wrote corpus pair: {train.root} {test.root}", file=sys.stderr)
    else:
        paths = generate(config, args.out)
        print(f"wrote corpus: {paths.root}", file=sys.stderr)
    return 0


def _cmd_extract(args) -> int:
    rules = load_rules(args.rules)
    diags = Diagnostics()
    vectors = extract_corpus(args.logs, rules, diags)
    features_to_csv(vectors, rules, args.out)
    if args.diagnostics:
        diags.write(args.diagnostics)
    elif len(diags):
        print(diags.render(), file=sys.stderr, end="")
    print(f"extracted {len(vectors)} scans x {len(rules)} features -> {args.out}", file=sys.stderr)
    return 0


def _cmd_ingest(args) -> int:
    diags = Diagnostics()
    fragments = []
    sources = {}
    for item in args.features:
        path, sep, group = item.partition("=")
        if not sep or group not in FEATURE_GROUPS:
            raise ConfigError(
                f"bad --features {item!r}; expected PATH=GROUP with GROUP in {FEATURE_GROUPS}"
            )
        fragments.append(load_features_csv(path, group, study=args.study, diagnostics=diags))
        sources[path] = sha256_file(path)
    dataset = merge(*fragments, diagnostics=diags)
    if args.labels:
        dataset = attach_labels(dataset, args.labels, diags)
        sources[args.labels] = sha256_file(args.labels)
    dataset.to_csv(args.out)
    write_json_atomic(str(args.out) + ".manifest.json", {
        "study": args.study,
        "n_samples": dataset.n_samples,
        "n_features": dataset.n_features,
        "groups": dataset.groups,
        "labeled": dataset.y is not None,
        "sources": sources,
    })
    if args.diagnostics:
        diags.write(args.diagnostics)
    elif len(diags):
        print(diags.render(), file=sys.stderr, end="")
    print(f"ingested {dataset.n_samples} rows x {dataset.n_features} columns -> {args.out}",
          file=sys.stderr)
    return 0


def _cmd_select(args) -> int:
    diags = Diagnostics()
    dataset = _load_feature_table(args.features, args.labels, args.group, diags)
    if dataset.y is None:
        raise DataError("selection requires labels")
    Z = Preprocessor().fit_transform(dataset)
    if args.method == "hsic":
        result = hsic_screen(Z.X, Z.y, Z.columns, cap=args.cap, sigma=args.sigma)
        write_csv(args.out, ["feature", "beta"], result.csv_rows())
        for note in result.notes:
            print(f"note: {note}", file=sys.stderr)
        print(f"hsic screen kept {len(result.selected)} features (lambda={result.lam:.6g}) "
              f"-> {args.out}", file=sys.stderr)
    else:
        spec = default_spec(args.model, seed=child_seed(args.seed, "cli-select"),
                            hyperparameters=_parse_json_flag(args.params, "--params") or {},
                            grid={})
        screen = hsic_screen(Z.X, Z.y, Z.columns, cap=args.cap, sigma=args.sigma)
        candidates = screen.selected or list(Z.columns)
        trace = forward_select(Z.X, Z.y, Z.columns, candidates, spec,
                               k_folds=args.k, max_features=args.max_features,
                               seed=args.seed, n_jobs=args.jobs)
        k = max(len(s.fold_aucs) for s in trace.steps)
        write_csv(args.out, ["step", "feature", "mean_auc"] + [f"fold{j}_auc" for j in range(k)],
                  trace.csv_rows())
        print(f"forward selection: best {trace.best_k} features, "
              f"max mean AUC {trace.max_auc:.4f} -> {args.out}", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    diags = Diagnostics()
    dataset = _load_feature_table(args.features, args.labels, args.group, diags)
    if dataset.y is None:
        raise DataError("training requires labels")
    pre = Preprocessor().fit(dataset)
    Z = pre.transform(dataset)
    spec = default_spec(
        args.model,
        seed=child_seed(args.seed, "cli-train"),
        hyperparameters=_parse_json_flag(args.params, "--params") or {},
        grid=_parse_json_flag(args.grid, "--grid") or {},
    )
    if spec.grid:
        folds = make_folds(Z.y, args.k, child_seed(args.seed, "cli-train-folds"))
        spec, table = grid_search(spec, Z.X, Z.y, folds)
        print(f"grid search best: {spec.hyperparameters} (AUC {table.best_auc:.4f})",
              file=sys.stderr)
    model = build_model(spec).fit(Z.X, Z.y)
    artifact = fitted_artifact(spec, model, Z.columns, preprocessor=pre.to_payload(),
                               metadata={"seed": args.seed, "k_folds": args.k,
                                         "n_train": Z.n_samples})
    digest = save_artifact(artifact, args.out)
    print(f"saved model {digest[:12]} -> {args.out}", file=sys.stderr)
    return 0


def _cmd_evaluate(args) -> int:
    artifact = load_artifact(args.model)
    diags = Diagnostics()
    dataset = _load_feature_table(args.features, args.labels, args.group, diags)
    if dataset.y is None:
        raise DataError("evaluation requires labels")
    pre = Preprocessor.from_payload(artifact.preprocessor)
    Z = pre.transform(dataset)
    idx = [Z.columns.index(c) for c in artifact.feature_names]
    scores = artifact.model().predict_proba(Z.X[:, idx])
    metrics = thresholded_metrics(scores, Z.y, args.threshold)
    roc = roc_curve(scores, Z.y)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_text_atomic(outdir / "metrics.json", dump_json(metrics.to_dict()))
    write_text_atomic(outdir / "metrics.txt", metrics_text(metrics))
    write_csv(outdir / "roc.csv", ["fpr", "tpr", "threshold"], roc.csv_rows())
    write_text_atomic(outdir / "roc.svg", roc_svg(roc))
    write_csv(outdir / "predictions.csv", ["scan_id", "label", "score"],
              [(sid, int(label), float(s)) for sid, label, s in zip(Z.scan_ids, Z.y, scores)])
    print(f"AUC {metrics.auc:.4f} accuracy {metrics.accuracy:.4f} -> {outdir}", file=sys.stderr)
    return 0


def _experiment_config(args, parser, corpus, config_path) -> ExperimentConfig:
    if config_path:
        config = ExperimentConfig.from_json(config_path)
    elif corpus:
        if args.seed is None:
            parser.error("--seed is required when no config file is given")
        config = ExperimentConfig(corpus=corpus, seed=args.seed)
    else:
        parser.error("either a config file or a corpus directory is required")
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "k_folds": args.k,
        "n_jobs": args.jobs,
        "max_features": args.max_features,
        "hsic_cap": args.cap,
        "threshold": args.threshold,
        "rules": args.rules,
        "feature_sets": args.feature_sets.split(",") if args.feature_sets else None,
        "families": args.families.split(",") if args.families else None,
        "grids": _parse_json_flag(args.grids, "--grids"),
        "params": _parse_json_flag(args.params, "--params"),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if config.seed is None:
        parser.error("a seed is required (config file or --seed)")
    return config.validate()


def _cmd_within(args, parser) -> int:
    config = _experiment_config(args, parser, args.corpus, args.config)
    report = run_within_dataset(config)
    outdir = Path(config.out_dir or _default_out()) / "within"
    manifest = emit_report(report, outdir)
    print(f"within-dataset report -> {outdir} ({len(manifest['files'])} files)", file=sys.stderr)
    sys.stdout.write(Path(outdir, "summary.txt").read_text(encoding="utf-8"))
    return 0


def _cmd_unseen(args, parser) -> int:
    train_config = _experiment_config(args, parser, args.train_corpus, args.train_config)
    if args.test_config:
        test_config = ExperimentConfig.from_json(args.test_config)
    elif args.test_corpus:
        test_config = ExperimentConfig(corpus=args.test_corpus, seed=train_config.seed)
    else:
        parser.error("either --test-config or --test-corpus is required")
    test_config.validate()
    report = run_unseen_study(train_config, test_config)
    outdir = Path(train_config.out_dir or _default_out()) / "unseen"
    manifest = emit_report(report, outdir)
    print(f"unseen-study report -> {outdir} ({len(manifest['files'])} files)", file=sys.stderr)
    sys.stdout.write(Path(outdir, "summary.txt").read_text(encoding="utf-8"))
    return 0


def _cmd_report(args) -> int:
    if args.values:
        with open(args.values, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        table = render_unseen_table([(label, values) for label, values in data["columns"]])
        sys.stdout.write(table)
        return 0
    run_dir = Path(args.run)
    summary = run_dir / "summary.txt"
    if not summary.is_file():
        raise DataError(f"{run_dir} does not look like a report directory (no summary.txt)")
    sys.stdout.write(summary.read_text(encoding="utf-8"))
    return 0


# ---------------------------------------------------------------------- main


def _add_common_experiment_flags(sub):
    sub.add_argument("--seed", type=int, default=None, help="root random seed (required)")
    sub.add_argument("--out", default=None, help="output directory (default $LOGQC_OUT or .)")
    sub.add_argument("--k", type=int, default=None, help="CV folds")
    sub.add_argument("--jobs", type=int, default=None, help="parallel workers inside modules")
    sub.add_argument("--max-features", type=int, default=None, help="forward-selection depth")
    sub.add_argument("--cap", type=int, default=None, help="HSIC screen size cap")
    sub.add_argument("--threshold", type=float, default=None, help="decision threshold")
    sub.add_argument("--rules", default=None, help="rule-spec path or 'default'")
    sub.add_argument("--feature-sets", default=None,
                     help=f"comma list from {','.join(FEATURE_SET_GROUPS)}")
    sub.add_argument("--families", default=None, help=f"comma list from {','.join(FAMILIES)}")
    sub.add_argument("--grids", "--grid", dest="grids", default=None,
                     help="JSON: family -> hyperparameter grid")
    sub.add_argument("--params", default=None, help="JSON: family -> fixed hyperparameters")


def build_parser() -> _Parser:
    parser = _Parser(prog="logqc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"logqc {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub = commands.add_parser("synth", help="generate a synthetic corpus (or shifted pair)")
    sub.add_argument("--out", required=True, help="corpus output directory")
    sub.add_argument("--n", type=int, default=200, help="number of scans")
    sub.add_argument("--pass-rate", type=float, default=0.74, help="fraction labelled pass")
    sub.add_argument("--seed", type=int, default=0, help="generator seed")
    sub.add_argument("--effect", action="append", metavar="GROUP=D",
                     help="effect size per feature group (repeatable)")
    sub.add_argument("--signal-features", action="append", metavar="GROUP=K",
                     help="number of signal features per group (repeatable)")
    sub.add_argument("--missing-step-rate", type=float, default=0.1,
                     help="chance a failing scan loses one step block")
    sub.add_argument("--shifted", action="store_true", help="write a train/test pair")
    sub.add_argument("--shift", action="append", metavar="GROUP:k=v,...",
                     help="test-corpus shift profile per group (with --shifted)")

    sub = commands.add_parser("extract", help="mine features from a directory of logs")
    sub.add_argument("--rules", default="default", help="rule-spec path or 'default'")
    sub.add_argument("--logs", required=True, help="directory of log files, one per scan")
    sub.add_argument("--out", required=True, help="features CSV to write")
    sub.add_argument("--diagnostics", default=None, help="diagnostics text file to write")

    sub = commands.add_parser("ingest", help="merge feature tables and labels into one CSV")
    sub.add_argument("--features", action="append", required=True, metavar="PATH=GROUP",
                     help=f"feature CSV tagged with a group from {FEATURE_GROUPS} (repeatable)")
    sub.add_argument("--labels", default=None, help="labels CSV (scan_id,label)")
    sub.add_argument("--study", default="study", help="study tag")
    sub.add_argument("--out", required=True, help="merged CSV to write (+ .manifest.json)")
    sub.add_argument("--diagnostics", default=None)

    sub = commands.add_parser("select", help="feature selection on a feature table")
    sub.add_argument("--features", required=True)
    sub.add_argument("--labels", required=True)
    sub.add_argument("--group", default="flagqc", choices=FEATURE_GROUPS)
    sub.add_argument("--method", choices=("hsic", "forward"), default="hsic")
    sub.add_argument("--cap", type=int, default=30)
    sub.add_argument("--sigma", type=float, default=1.0)
    sub.add_argument("--model", default="logistic_regression", choices=FAMILIES,
                     help="scoring model for forward selection")
    sub.add_argument("--params", default=None, help="JSON fixed hyperparameters")
    sub.add_argument("--k", type=int, default=5)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--max-features", type=int, default=20)
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--out", required=True)

    sub = commands.add_parser("train", help="fit one model on a feature table")
    sub.add_argument("--features", required=True)
    sub.add_argument("--labels", required=True)
    sub.add_argument("--group", default="flagqc", choices=FEATURE_GROUPS)
    sub.add_argument("--model", required=True, choices=FAMILIES)
    sub.add_argument("--params", default=None, help="JSON fixed hyperparameters")
    sub.add_argument("--grid", default=None, help="JSON hyperparameter grid (enables tuning)")
    sub.add_argument("--k", type=int, default=5)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", required=True, help="model file to write")

    sub = commands.add_parser("evaluate", help="evaluate a saved model on a labeled table")
    sub.add_argument("--model", required=True)
    sub.add_argument("--features", required=True)
    sub.add_argument("--labels", required=True)
    sub.add_argument("--group", default="flagqc", choices=FEATURE_GROUPS)
    sub.add_argument("--threshold", type=float, default=0.5)
    sub.add_argument("--out", required=True, help="output directory")

    sub = commands.add_parser("within", help="within-dataset CV experiment")
    sub.add_argument("--config", default=None, help="experiment config JSON")
    sub.add_argument("--corpus", default=None, help="corpus directory")
    _add_common_experiment_flags(sub)

    sub = commands.add_parser("unseen", help="train on one corpus, test on another")
    sub.add_argument("--train-config", default=None)
    sub.add_argument("--test-config", default=None)
    sub.add_argument("--train", dest="train_corpus", default=None, help="training corpus dir")
    sub.add_argument("--test", dest="test_corpus", default=None, help="test corpus dir")
    _add_common_experiment_flags(sub)

    sub = commands.add_parser("report", help="re-render a report directory or a values file")
    sub.add_argument("--run", default=None, help="report directory from within/unseen")
    sub.add_argument("--values", default=None,
                     help='JSON {"columns": [[label, {auc,accuracy,precision,recall}], ...]}')
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": lambda: _cmd_synth(args),
        "extract": lambda: _cmd_extract(args),
        "ingest": lambda: _cmd_ingest(args),
        "select": lambda: _cmd_select(args),
        "train": lambda: _cmd_train(args),
        "evaluate": lambda: _cmd_evaluate(args),
        "within": lambda: _cmd_within(args, parser),
        "unseen": lambda: _cmd_unseen(args, parser),
        "report": lambda: _cmd_report(args),
    }
    try:
        return handlers[args.command]()
    except (RuleSpecError, DataError, ConfigError) as exc:
        print(f"logqc {args.command}: {exc}", file=sys.stderr)
        return 2
    except LogQcError as exc:
        print(f"logqc {args.command}: {exc}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        return 3
    except Exception as exc:  # runtime failure
        print(f"logqc {args.command}: unexpected failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
