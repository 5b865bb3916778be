"""Experiment configuration and the full run: features -> folds -> models -> reports."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, baselines, plots, ubrain
from .baselines import ClassifierConfig, MlpConfig, TreeConfig, UBrainSettings
from .dataset import Dataset, load_manifest, make_binary_task
from .errors import ConfigError, ConsistencyError, DataError
from .evaluation import (FeatureTable, cross_validate, cv_rows, one_vs_rest_suite,
                         rows_to_csv, suite_rows)
from .pipeline import (DEFAULT_PCA_ENERGY, DEFAULT_REDUCTION, FeaturePipeline, ReductionSpec,
                       check_chain, extract_features)

log = logging.getLogger(__name__)

AUTO = "auto"


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str = ""
    pipeline: str = "fft"
    reduction: str = AUTO
    pca_energy: str = AUTO
    pca_k: str = AUTO
    lda_k: str = AUTO
    channel: str = "ch1"
    denoise_q: float = 0.95
    extended: bool = False
    wavelet: str = "db5"
    classifier: str = "ubrain"
    seed: int = 0
    k: int = 10
    positive_class: str = AUTO
    hidden_units: int = 10
    learning_rate: float = 0.3
    momentum: float = 0.2
    epochs: int = 500
    min_leaf: int = 2
    ubrain_levels: int = 16
    ubrain_conflicts: str = "drop"
    standardize: bool = True
    figures: str = "png"

    # ---- parsing -------------------------------------------------------

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        current = {f.name: getattr(base or cls(), f.name) for f in fields(cls)}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            raw = str(raw).strip()
            typ = types[key]
            try:
                if typ in ("int", int):
                    current[key] = int(raw)
                elif typ in ("float", float):
                    current[key] = float(raw)
                elif typ in ("bool", bool):
                    current[key] = _parse_bool(raw, key)
                else:
                    current[key] = raw
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None
        return cls(**current)

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values = {}
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            values[k.strip()] = v.strip()
        return cls.from_mapping(values)

    def to_text(self) -> str:
        return "".join(f"{k}={_render(getattr(self, k))}\n" for k in self.keys())

    # ---- resolution ----------------------------------------------------

    def resolved(self) -> "ExperimentConfig":
        """Fill ``auto`` values with the per-pipeline defaults and validate the chain."""
        if self.pipeline not in DEFAULT_REDUCTION:
            check_chain(self.pipeline, "none")
        red = DEFAULT_REDUCTION[self.pipeline] if self.reduction == AUTO else self.reduction
        check_chain(self.pipeline, red)
        energy = self.pca_energy
        if energy == AUTO:
            energy = repr(DEFAULT_PCA_ENERGY.get(self.pipeline, 0.90)) if red != "none" else AUTO
        upd = {"reduction": red, "pca_energy": energy}
        if self.manifest:
            upd["manifest"] = str(Path(self.manifest).resolve())
        out = ExperimentConfig.from_mapping(upd, base=self)
        out.classifier_config()
        out.feature_pipeline()
        out.reduction_spec()
        if out.k < 2:
            raise ConfigError("k must be >= 2")
        if out.figures not in plots.FIGURE_FORMATS:
            raise ConfigError(f"figures must be one of {', '.join(plots.FIGURE_FORMATS)}")
        return out

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(
            kind=self.classifier, seed=self.seed,
            mlp=MlpConfig(self.hidden_units, self.learning_rate, self.momentum, self.epochs),
            tree=TreeConfig(self.min_leaf),
            ubrain=UBrainSettings(self.ubrain_levels, self.ubrain_conflicts),
            standardize_features=self.standardize,
        )

    def feature_pipeline(self) -> FeaturePipeline:
        if not 0.0 < self.denoise_q <= 1.0:
            raise ConfigError("denoise_q must lie in (0, 1]")
        return FeaturePipeline(self.pipeline, self.channel, self.denoise_q, self.extended, self.wavelet)

    def reduction_spec(self) -> ReductionSpec | None:
        red = DEFAULT_REDUCTION.get(self.pipeline, "none") if self.reduction == AUTO else self.reduction
        if red == "none":
            return None
        energy = DEFAULT_PCA_ENERGY.get(self.pipeline, 0.90) if self.pca_energy == AUTO else _float(self.pca_energy, "pca_energy")
        if not 0.0 < energy <= 1.0:
            raise ConfigError("pca_energy must lie in (0, 1]")
        return ReductionSpec(red, energy, _opt_int(self.pca_k, "pca_k"), _opt_int(self.lda_k, "lda_k"))

    @property
    def pipeline_label(self) -> str:
        red = self.reduction if self.reduction != AUTO else DEFAULT_REDUCTION.get(self.pipeline, "none")
        return self.pipeline if red == "none" else f"{self.pipeline}+{red}"


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _opt_int(text: str, key: str) -> int | None:
    if text in (AUTO, "", "none"):
        return None
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer or 'auto', got {text!r}") from None
    if v < 1:
        raise ConfigError(f"{key} must be >= 1")
    return v


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------

def _stage(name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ConfigError, DataError, ConsistencyError) as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def binary_positive(cfg: ExperimentConfig, dataset: Dataset) -> int:
    classes = dataset.class_ids
    if cfg.positive_class == AUTO:
        return classes[0]
    try:
        pc = int(cfg.positive_class)
    except ValueError:
        raise ConfigError(f"positive_class must be an integer or 'auto', got {cfg.positive_class!r}") from None
    if pc not in classes:
        raise ConfigError(f"positive_class {pc} is not in the dataset (classes {classes})")
    return pc


def evaluate(cfg: ExperimentConfig, dataset: Dataset, features: FeatureTable, jobs: int = 1):
    """Cross-validate; returns (report rows, list of CVResult).

    Two classes give a single binary task; more give one-vs-rest with a macro row.
    """
    clf = cfg.classifier_config()
    red = cfg.reduction_spec()
    classes = dataset.class_ids
    if len(classes) < 2:
        raise DataError("evaluation needs at least two classes")
    if len(classes) == 2:
        task = make_binary_task(dataset, binary_positive(cfg, dataset))
        res = cross_validate(task, features, clf, cfg.k, cfg.seed, red)
        return cv_rows(cfg.pipeline_label, cfg.classifier, res), [res]
    suite = one_vs_rest_suite(dataset, features, clf, cfg.k, cfg.seed, red, jobs)
    return suite_rows(cfg.pipeline_label, cfg.classifier, suite), list(suite.per_class)


def model_bundle(cfg: ExperimentConfig, positive_class: int, model, reducer) -> dict:
    return {
        "format": "eddyclass-model/1",
        "pipeline": {"method": cfg.pipeline, "channel": cfg.channel, "denoise_q": cfg.denoise_q,
                     "extended": cfg.extended, "wavelet": cfg.wavelet},
        "positive_class": positive_class,
        "reduction": reducer.to_dict() if reducer is not None else None,
        "classifier": model.to_dict(),
    }


def write_bundle(path: Path, bundle: dict) -> None:
    Path(path).write_text(json.dumps(bundle, sort_keys=True) + "\n", encoding="utf-8")


def load_bundle(path: Path):
    """Return (FeaturePipeline, positive_class, reducer or None, classifier model)."""
    from .pipeline import FittedReduction
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
        p = d["pipeline"]
        pipe = FeaturePipeline(p["method"], p["channel"], p["denoise_q"], p["extended"], p["wavelet"])
        red = FittedReduction.from_dict(d["reduction"]) if d.get("reduction") else None
        model = baselines.model_from_text(json.dumps(d["classifier"]))
        return pipe, int(d["positive_class"]), red, model
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None


def predict_records(bundle, records) -> np.ndarray:
    pipe, _, red, model = bundle
    X = np.vstack([pipe.extract(r) for r in records])
    if red is not None:
        X = red(X)
    return np.asarray(baselines.predict(model, X), dtype=bool)


def _write_formulas(out: Path, results) -> None:
    text, rows = [], ["class_id,fold,term_index,literal_index,negated"]
    for res in results:
        for o in res.folds:
            f = o.model.formula
            text.append(f"class {res.positive_class} fold {o.fold}: {ubrain.format_formula(f)}")
            rows += [f"{res.positive_class},{o.fold},{t},{lit},{neg}" for t, lit, neg in ubrain.formula_rows(f)]
    (out / "formulas.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
    (out / "formulas.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def run_experiment(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1,
                   dataset: Dataset | None = None) -> dict:
    """Run the configured chain end to end and write every artifact under ``out_dir``.

    The config is resolved and validated before any data are touched.
    Returns the run log.
    """
    cfg = cfg.resolved()
    if dataset is None:
        if not cfg.manifest:
            raise ConfigError("no manifest given")
        manifest = Path(cfg.manifest)
        dataset = _stage("load", load_manifest, manifest / "manifest.csv" if manifest.is_dir() else manifest)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    pipe = cfg.feature_pipeline()
    features = _stage("features", extract_features, dataset, pipe, jobs)
    t_feat = time.perf_counter() - t0
    if cfg.pipeline != "cwt-full":
        plots.write_features_csv(out / "features.csv", features.record_ids, dataset.labels(),
                                 pipe.column_names(features.matrix.shape[1]), features.matrix)

    rows, results = _stage("evaluate", evaluate, cfg, dataset, features, jobs)
    (out / "report.csv").write_text(rows_to_csv(rows), encoding="utf-8")

    models = out / "models"
    models.mkdir(exist_ok=True)
    for res in results:
        for o in res.folds:
            write_bundle(models / f"class_{res.positive_class}_fold_{o.fold}.json",
                         model_bundle(cfg, res.positive_class, o.model, o.reducer))
    if cfg.classifier == "ubrain":
        _write_formulas(out, results)
    (out / "folds.csv").write_text(
        "class_id,record_id,fold\n" + "".join(f"{res.positive_class},{rid},{f}\n" for res in results
                for rid, f in res.plan.assignments.items()),
        encoding="utf-8")

    figures = []
    if cfg.pipeline == "cbir":
        figures += plots.emit_plots(out, "scatter-lwa", fig_format=cfg.figures)
    figures += plots.emit_plots(out, "metric-bars", fig_format=cfg.figures)

    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    run_log = {
        "version": __version__,
        "config": {k: getattr(cfg, k) for k in cfg.keys()},
        "pipeline_label": cfg.pipeline_label,
        "n_records": len(dataset),
        "class_ids": dataset.class_ids,
        "feature_dims": int(features.matrix.shape[1]),
        "tasks": [res.positive_class for res in results],
        "cv_seed": cfg.seed,
        "classifier_seed": cfg.seed,
        "jobs": jobs,
        "seconds": {"features": round(t_feat, 3), "total": round(time.perf_counter() - t0, 3)},
        "files": sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()
                        and p.name != "run_log.json"),
    }
    (out / "run_log.json").write_text(json.dumps(run_log, indent=2) + "\n", encoding="utf-8")
    log.info("run finished in %.1fs -> %s", run_log["seconds"]["total"], out)
    return run_log
