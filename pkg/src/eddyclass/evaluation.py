"""Confusion matrices, the seven binary metrics, k-fold cross-validation and one-vs-rest suites."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import baselines
from .baselines import ClassifierConfig
from .dataset import BinaryTask, Dataset, FoldPlan, make_binary_task, stratified_kfold
from .errors import DataError

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "precision", "mcc", "auc", "f_measure")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise DataError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    sensitivity: float
    specificity: float
    precision: float
    mcc: float
    auc: float
    f_measure: float
    degenerate: frozenset = field(default_factory=frozenset)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, m) for m in METRIC_NAMES)

    @classmethod
    def mean(cls, reports: Sequence["MetricsReport"]) -> "MetricsReport":
        if not reports:
            raise DataError("cannot average zero reports")
        vals = np.array([r.values() for r in reports], dtype=float)
        avg = [math.fsum(col) / len(reports) for col in vals.T]
        flags = frozenset().union(*(r.degenerate for r in reports))
        return cls(*avg, degenerate=flags)


def confusion(predictions, labels) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=bool)
    lab = np.asarray(labels, dtype=bool)
    if pred.shape != lab.shape:
        raise DataError(f"length mismatch: {pred.shape} predictions vs {lab.shape} labels")
    if pred.size < 1:
        raise DataError("confusion needs at least one instance")
    return ConfusionMatrix(
        tp=int(np.sum(pred & lab)),
        tn=int(np.sum(~pred & ~lab)),
        fp=int(np.sum(pred & ~lab)),
        fn=int(np.sum(~pred & lab)),
    )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """The seven metrics; any zero-denominator metric is 0 and named in ``degenerate``.

    AUC is the closed form (sensitivity + specificity) / 2, not a ROC integral.
    """
    if cm.total < 1:
        raise DataError("metrics need at least one evaluated instance")
    flags = set()

    def ratio(num, den, name):
        if den == 0:
            flags.add(name)
            return 0.0
        return num / den

    tp, tn, fp, fn = cm.tp, cm.tn, cm.fp, cm.fn
    accuracy = (tp + tn) / cm.total
    sensitivity = ratio(tp, tp + fn, "sensitivity")
    specificity = ratio(tn, tn + fp, "specificity")
    precision = ratio(tp, tp + fp, "precision")
    f_measure = ratio(2 * sensitivity * precision, sensitivity + precision, "f_measure")
    auc = (sensitivity + specificity) / 2
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        flags.add("mcc")
        mcc = 0.0
    else:
        mcc = (tp * tn - fp * fn) / math.sqrt(den)
    return MetricsReport(accuracy, sensitivity, specificity, precision, mcc, auc, f_measure,
                         frozenset(flags))


# --------------------------------------------------------------------------
# Cross-validation
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Raw (pre-reduction) features for every record, in dataset order."""

    record_ids: tuple[str, ...]
    matrix: np.ndarray
    method: str = ""

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        index = {rid: i for i, rid in enumerate(self.record_ids)}
        try:
            return self.matrix[[index[r] for r in ids]]
        except KeyError as exc:
            raise DataError(f"no features for record {exc.args[0]!r}") from None


@dataclass(frozen=True, eq=False)
class FoldOutcome:
    fold: int
    confusion: ConfusionMatrix
    report: MetricsReport
    model: object
    reducer: object


@dataclass(frozen=True, eq=False)
class CVResult:
    positive_class: int
    folds: tuple[FoldOutcome, ...]
    mean: MetricsReport
    pooled: ConfusionMatrix
    plan: FoldPlan

    @property
    def fold_reports(self) -> list[MetricsReport]:
        return [f.report for f in self.folds]


def run_fold(task: BinaryTask, features: FeatureTable, plan: FoldPlan, fold: int,
             reducer_factory, config: ClassifierConfig) -> FoldOutcome:
    """Fit reducer and classifier on the other folds, score the held-out fold."""
    labels = task.label_of()
    train_ids = [r for r in task.record_ids if plan.assignments[r] != fold]
    test_ids = [r for r in task.record_ids if plan.assignments[r] == fold]
    y_train = np.array([labels[r] for r in train_ids])
    y_test = np.array([labels[r] for r in test_ids])
    if not y_test.any():
        raise DataError(f"fold {fold} holds no positive record (stratification failed)")
    X_train = features.rows(train_ids)
    X_test = features.rows(test_ids)
    reducer = reducer_factory(X_train, y_train) if reducer_factory else None
    if reducer is not None:
        X_train, X_test = reducer(X_train), reducer(X_test)
    model = baselines.fit(config, X_train, y_train)
    pred = baselines.predict(model, X_test)
    cm = confusion(pred, y_test)
    return FoldOutcome(fold, cm, metrics(cm), model, reducer)


def cross_validate(task: BinaryTask, features: FeatureTable, config: ClassifierConfig,
                   k: int = 10, seed: int = 0, reducer_factory=None) -> CVResult:
    """k-fold CV; the headline report is the arithmetic mean of per-fold metrics.

    ``reducer_factory(X_train, y_train)`` returns a callable applied to both
    the training and validation rows of a fold, so every fitted transform
    sees training folds only.
    """
    plan = stratified_kfold(task, k, seed)
    outcomes = tuple(run_fold(task, features, plan, f, reducer_factory, config) for f in range(k))
    pooled = ConfusionMatrix()
    for o in outcomes:
        pooled = pooled + o.confusion
    return CVResult(task.positive_class, outcomes,
                    MetricsReport.mean([o.report for o in outcomes]), pooled, plan)


@dataclass(frozen=True, eq=False)
class SuiteResult:
    per_class: tuple[CVResult, ...]
    macro: MetricsReport


def _cv_job(args):
    task, features, config, k, seed, reducer_factory = args
    return cross_validate(task, features, config, k, seed, reducer_factory)


def one_vs_rest_suite(dataset: Dataset, features: FeatureTable, config: ClassifierConfig,
                      k: int = 10, seed: int = 0, reducer_factory=None,
                      jobs: int = 1) -> SuiteResult:
    """One cross-validation per class as positive; macro report = mean of per-class means.

    With ``jobs > 1`` classes run in worker processes; results are merged in
    class order so the output does not depend on scheduling.
    """
    classes = dataset.class_ids
    if len(classes) < 2:
        raise DataError("one-vs-rest needs at least two classes")
    args = [(make_binary_task(dataset, c), features, config, k, seed, reducer_factory)
            for c in classes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = tuple(pool.map(_cv_job, args))
    else:
        results = tuple(_cv_job(a) for a in args)
    return SuiteResult(results, MetricsReport.mean([r.mean for r in results]))


# --------------------------------------------------------------------------
# Report CSV
# --------------------------------------------------------------------------

REPORT_HEADER = ["pipeline", "classifier", "class_id", "fold", *METRIC_NAMES,
                 "tp", "tn", "fp", "fn", "degenerate"]


def _num(x: float) -> str:
    return repr(float(x))


def report_row(pipeline: str, classifier: str, class_id, fold, report: MetricsReport,
               cm: ConfusionMatrix | None) -> list[str]:
    counts = [str(cm.tp), str(cm.tn), str(cm.fp), str(cm.fn)] if cm else ["", "", "", ""]
    return [pipeline, classifier, str(class_id), str(fold), *map(_num, report.values()),
            *counts, ";".join(sorted(report.degenerate))]


def cv_rows(pipeline: str, classifier: str, result: CVResult) -> list[list[str]]:
    rows = [report_row(pipeline, classifier, result.positive_class, o.fold, o.report, o.confusion)
            for o in result.folds]
    rows.append(report_row(pipeline, classifier, result.positive_class, "mean", result.mean,
                           result.pooled))
    return rows


def suite_rows(pipeline: str, classifier: str, suite: SuiteResult) -> list[list[str]]:
    rows = []
    for res in suite.per_class:
        rows += cv_rows(pipeline, classifier, res)
    pooled = ConfusionMatrix()
    for res in suite.per_class:
        pooled = pooled + res.pooled
    rows.append(report_row(pipeline, classifier, "all", "macro", suite.macro, pooled))
    return rows


def rows_to_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    writer.writerows(rows)
    return buf.getvalue()


def read_report(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
