"""``eddyclass`` command line: import, features, train, evaluate, run, plot, synth.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 consistency error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, plots, synth
from .dataset import load_manifest, make_binary_task, write_manifest
from .errors import ConfigError, DataError, EddyClassError
from .evaluation import FeatureTable, rows_to_csv
from .experiment import (ExperimentConfig, binary_positive, evaluate, load_bundle, model_bundle,
                         predict_records, run_experiment, write_bundle)
from .importers import FORMATS, import_raw
from .pipeline import extract_features

log = logging.getLogger("eddyclass")

# flags shared by every command that builds an ExperimentConfig; dest == config key
_EXPERIMENT_FLAGS = [
    ("--manifest", str, "canonical dataset directory or manifest.csv"),
    ("--pipeline", str, "fft | cwt-mavsap | cwt-full | dwt | pwt | cbir"),
    ("--reduction", str, "none | pca | pca+lda (default: per pipeline)"),
    ("--pca-energy", str, "retained PCA energy fraction"),
    ("--pca-k", str, "fixed number of PCA components"),
    ("--lda-k", str, "number of LDA directions"),
    ("--channel", str, "ch1 | ch2 | complex"),
    ("--denoise-q", float, "impedance-plane denoising quantile (cbir)"),
    ("--extended", str, "cbir: append the five invariant descriptors (true/false)"),
    ("--wavelet", str, "Daubechies wavelet name, e.g. db5"),
    ("--classifier", str, "nb | mlp | tree | ubrain"),
    ("--seed", int, "seed for fold plans and classifier initialisation"),
    ("--k", int, "number of cross-validation folds"),
    ("--positive-class", str, "positive class of a two-class dataset (default: smallest id)"),
    ("--hidden-units", int, "MLP hidden units"),
    ("--learning-rate", float, "MLP learning rate"),
    ("--momentum", float, "MLP momentum"),
    ("--epochs", int, "MLP epochs"),
    ("--min-leaf", int, "tree minimum leaf size"),
    ("--ubrain-levels", int, "thermometer levels per real feature for U-BRAIN"),
    ("--ubrain-conflicts", str, "drop | error: patterns present in both classes"),
    ("--standardize", str, "standardize real features for nb/mlp (true/false)"),
    ("--figures", str, "png | svg | none"),
]


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value config file; flags override it")
    for flag, typ, help_ in _EXPERIMENT_FLAGS:
        p.add_argument(flag, type=typ, default=None, help=help_)


def _experiment_config(args) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for flag, _, _ in _EXPERIMENT_FLAGS:
        key = flag[2:].replace("-", "_")
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    return ExperimentConfig.from_mapping(overrides, base=base).resolved()


def _load(cfg: ExperimentConfig):
    if not cfg.manifest:
        raise ConfigError("no manifest given (--manifest or manifest= in the config file)")
    path = Path(cfg.manifest)
    return load_manifest(path / "manifest.csv" if path.is_dir() else path)


def _features_for(cfg, dataset, features_csv: Path | None, jobs: int) -> FeatureTable:
    if features_csv is None:
        return extract_features(dataset, cfg.feature_pipeline(), jobs)
    ids, _, _, X = plots.read_features_csv(features_csv)
    table = FeatureTable(tuple(ids), X, cfg.pipeline)
    table.rows(dataset.record_ids)  # every record must have a row
    return table


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_import(args) -> int:
    ds = import_raw(args.input, args.format)
    manifest = write_manifest(ds, args.out)
    print(f"imported {len(ds)} records in {len(ds.class_ids)} classes -> {manifest}")
    return 0


def cmd_synth(args) -> int:
    if args.set is not None:
        ds = synth.make_set(args.set, seed=args.seed, records_per_class=args.records_per_class)
    else:
        classes = [int(c) for c in args.classes.split(",")] if args.classes else None
        ds = synth.make_dataset(classes, args.records_per_class, args.seed)
    manifest = write_manifest(ds, args.out)
    print(f"wrote {len(ds)} synthetic records -> {manifest}")
    return 0


def cmd_features(args) -> int:
    cfg = _experiment_config(args)
    ds = _load(cfg)
    pipe = cfg.feature_pipeline()
    table = extract_features(ds, pipe, args.jobs)
    plots.write_features_csv(args.out, table.record_ids, ds.labels(),
                             pipe.column_names(table.matrix.shape[1]), table.matrix)
    print(f"{table.matrix.shape[0]} x {table.matrix.shape[1]} features -> {args.out}")
    return 0


def cmd_train(args) -> int:
    import numpy as np
    from . import baselines

    cfg = _experiment_config(args)
    ds = _load(cfg)
    positive = binary_positive(cfg, ds)
    task = make_binary_task(ds, positive)
    table = _features_for(cfg, ds, args.features, args.jobs)
    labels = task.label_of()
    ids = list(ds.record_ids)
    X = table.rows(ids)
    y = np.array([labels[r] for r in ids])
    spec = cfg.reduction_spec()
    reducer = spec(X, y) if spec else None
    model = baselines.fit(cfg.classifier_config(), reducer(X) if reducer else X, y)
    write_bundle(args.model, model_bundle(cfg, positive, model, reducer))
    print(f"trained {cfg.classifier} on {len(ids)} records (positive class {positive}) -> {args.model}")
    return 0


def cmd_predict(args) -> int:
    bundle = load_bundle(args.model)
    ds = load_manifest(args.manifest / "manifest.csv" if args.manifest.is_dir() else args.manifest)
    pred = predict_records(bundle, ds.records)
    lines = ["record_id,class_id,predicted_positive"]
    lines += [f"{r.record_id},{r.class_id},{int(p)}" for r, p in zip(ds.records, pred)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _experiment_config(args)
    ds = _load(cfg)
    table = _features_for(cfg, ds, args.features, args.jobs)
    rows, _ = evaluate(cfg, ds, table, args.jobs)
    text = rows_to_csv(rows)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
        print(f"report -> {args.report}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    run_log = run_experiment(cfg, args.out, jobs=args.jobs)
    print(f"{run_log['pipeline_label']} / {cfg.classifier}: {len(run_log['tasks'])} task(s) -> {args.out}")
    return 0


def cmd_plot(args) -> int:
    if args.kind != "all":
        for path in plots.emit_plots(args.run_dir, args.kind, args.out, args.format, args.positive_class):
            print(path)
        return 0
    # "all": emit whatever the run directory supports
    emitted = 0
    for kind in plots.KINDS:
        try:
            paths = plots.emit_plots(args.run_dir, kind, args.out, args.format, args.positive_class)
        except DataError as exc:
            log.warning("skipping %s: %s", kind, exc)
            continue
        emitted += len(paths)
        for path in paths:
            print(path)
    if not emitted:
        raise DataError(f"{args.run_dir}: nothing to plot")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eddyclass", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="convert a raw dataset to canonical form")
    p.add_argument("input", type=Path)
    p.add_argument("--format", choices=FORMATS, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--set", type=int, choices=(1, 2), help="1: classes 1-2; 2: all twelve classes")
    p.add_argument("--classes", help="comma-separated class ids (instead of --set)")
    p.add_argument("--records-per-class", type=int, default=synth.RECORDS_PER_CLASS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract a features CSV")
    _add_experiment_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit reduction + classifier on a whole dataset")
    _add_experiment_flags(p)
    p.add_argument("--features", type=Path, help="reuse a features CSV")
    p.add_argument("--model", type=Path, required=True, help="output model file")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify records with a trained model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="k-fold cross-validation report")
    _add_experiment_flags(p)
    p.add_argument("--features", type=Path, help="reuse a features CSV")
    p.add_argument("--report", type=Path, help="output CSV (default: stdout)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full chain: features, CV, models, formulas, plots")
    _add_experiment_flags(p)
    p.add_argument("--out", type=Path, required=True, help="run directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="plot data and figures from a run directory")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--kind", choices=(*plots.KINDS, "all"), required=True)
    p.add_argument("--out", type=Path, help="output directory (default: <run_dir>/plots)")
    p.add_argument("--format", choices=plots.FIGURE_FORMATS, default="png")
    p.add_argument("--positive-class", type=int)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return ConfigError.exit_code
    try:
        return args.func(args)
    except EddyClassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
