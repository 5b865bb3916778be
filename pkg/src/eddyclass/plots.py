"""Plot data (CSV, the contract) and static figures rendered from a run directory.

Kinds:

* ``scatter-lwa`` -- per-record (L, W, alpha) of a ``cbir`` run;
* ``pca-3d``      -- first three principal components of the run's features;
* ``lda-1d``      -- one discriminant value per record (PCA then LDA on the
  positive class vs the rest);
* ``metric-bars`` -- the headline value of every metric for each
  (pipeline, classifier) report found in the directory or its sub-directories.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from . import dimred
from .errors import ConfigError, DataError
from .evaluation import METRIC_NAMES, read_report

KINDS = ("scatter-lwa", "lda-1d", "pca-3d", "metric-bars")
FIGURE_FORMATS = ("png", "svg", "none")


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_features_csv(path: Path) -> tuple[list[str], np.ndarray, list[str], np.ndarray]:
    """Return (record_ids, class_ids, column names, matrix) from a features CSV."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing intermediate: {path} (re-run with a pipeline that stores features)")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["record_id", "class_id"]:
            raise DataError(f"{path}:1: expected header starting 'record_id,class_id'")
        ids, classes, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} columns")
            try:
                classes.append(int(row[1]))
                rows.append([float(v) for v in row[2:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            ids.append(row[0])
    if not ids:
        raise DataError(f"{path}: no rows")
    return ids, np.array(classes), header[2:], np.array(rows, dtype=float)


def write_features_csv(path: Path, record_ids, class_ids, columns, matrix) -> Path:
    rows = [[rid, str(int(c)), *map(_fmt, vec)] for rid, c, vec in zip(record_ids, class_ids, matrix)]
    return _write_csv(Path(path), ["record_id", "class_id", *columns], rows)


def _read_config(run_dir: Path) -> dict[str, str]:
    path = run_dir / "config.txt"
    if not path.exists():
        return {}
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" in line and not line.lstrip().startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# --------------------------------------------------------------------------
# Figures
# --------------------------------------------------------------------------

def _figure():
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "eddyclass"  # stable SVG element ids
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path: Path, fmt: str) -> Path:
    plt = _figure()
    # no timestamps, so re-rendering gives identical files
    meta = {"Date": None} if fmt == "svg" else {"Software": None}
    fig.savefig(path, format=fmt, metadata=meta)
    plt.close(fig)
    return path


def _class_colors(classes: np.ndarray):
    plt = _figure()
    uniq = sorted(set(classes.tolist()))
    cmap = plt.get_cmap("tab20", max(len(uniq), 1))
    return {c: cmap(i) for i, c in enumerate(uniq)}


def _scatter3(points: np.ndarray, classes: np.ndarray, labels: tuple[str, str, str], title: str):
    plt = _figure()
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    colors = _class_colors(classes)
    for c, col in colors.items():
        m = classes == c
        ax.scatter(points[m, 0], points[m, 1], points[m, 2], s=12, color=col, label=str(c))
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_zlabel(labels[2])
    ax.set_title(title)
    ax.legend(fontsize=6, title="class", loc="upper left")
    return fig


# --------------------------------------------------------------------------
# Kinds
# --------------------------------------------------------------------------

def scatter_lwa(run_dir: Path, out_dir: Path, fig_format: str) -> list[Path]:
    _, classes, cols, X = read_features_csv(run_dir / "features.csv")
    try:
        idx = [cols.index(c) for c in ("L", "W", "alpha")]
    except ValueError:
        raise DataError(f"{run_dir}: features carry no L,W,alpha columns (scatter-lwa needs a cbir run)") from None
    pts = X[:, idx]
    rows = [[str(int(c)), *map(_fmt, p)] for c, p in zip(classes, pts)]
    out = [_write_csv(out_dir / "scatter-lwa.csv", ["class_id", "L", "W", "alpha"], rows)]
    if fig_format != "none":
        fig = _scatter3(pts, classes, ("L", "W", "alpha [deg]"), "shape signatures")
        out.append(_save(fig, out_dir / f"scatter-lwa.{fig_format}", fig_format))
    return out


def pca_3d(run_dir: Path, out_dir: Path, fig_format: str) -> list[Path]:
    ids, classes, _, X = read_features_csv(run_dir / "features.csv")
    k = min(3, X.shape[1], len(X))
    model = dimred.pca_fit(X, energy=None, k=k)
    Z = dimred.pca_project(model, X)
    if Z.shape[1] < 3:
        Z = np.hstack([Z, np.zeros((len(Z), 3 - Z.shape[1]))])
    rows = [[rid, str(int(c)), *map(_fmt, z)] for rid, c, z in zip(ids, classes, Z)]
    out = [_write_csv(out_dir / "pca-3d.csv", ["record_id", "class_id", "pc1", "pc2", "pc3"], rows)]
    if fig_format != "none":
        fig = _scatter3(Z, classes, ("pc1", "pc2", "pc3"), "first three principal components")
        out.append(_save(fig, out_dir / f"pca-3d.{fig_format}", fig_format))
    return out


def lda_1d(run_dir: Path, out_dir: Path, fig_format: str, positive_class: int | None = None) -> list[Path]:
    ids, classes, _, X = read_features_csv(run_dir / "features.csv")
    cfg = _read_config(run_dir)
    uniq = sorted(set(classes.tolist()))
    if len(uniq) < 2:
        raise DataError("lda-1d needs at least two classes")
    if positive_class is None:
        pc = cfg.get("positive_class", "auto")
        positive_class = uniq[0] if pc in ("", "auto") else int(pc)
    y = classes == positive_class
    if not y.any():
        raise DataError(f"positive class {positive_class} not present in the features")
    pe = cfg.get("pca_energy", "auto")
    energy = 0.90 if pe in ("", "auto") else float(pe)
    pca = dimred.pca_fit(X, energy=energy)
    cap = len(X) - 2
    if pca.k > cap:
        pca = dimred.pca_fit(X, k=cap)
    lda = dimred.lda_fit(dimred.pca_project(pca, X), y, 1)
    z = dimred.lda_project(lda, dimred.pca_project(pca, X))[:, 0]
    rows = [[rid, str(int(c)), _fmt(v)] for rid, c, v in zip(ids, classes, z)]
    out = [_write_csv(out_dir / "lda-1d.csv", ["record_id", "class_id", "lda1"], rows)]
    if fig_format != "none":
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 3))
        colors = _class_colors(classes)
        for c, col in colors.items():
            m = classes == c
            ax.scatter(z[m], np.full(m.sum(), 0.0 if c == positive_class else 1.0),
                       s=14, color=col, label=str(c))
        ax.set_yticks([0, 1], [f"class {positive_class}", "rest"])
        ax.set_xlabel("discriminant value")
        ax.set_title("LDA class separation")
        fig.tight_layout()
        out.append(_save(fig, out_dir / f"lda-1d.{fig_format}", fig_format))
    return out


def _summary_rows(report: list[dict]) -> list[dict]:
    """The headline rows: the macro row if present, otherwise every ``mean`` row."""
    macro = [r for r in report if r["fold"] == "macro"]
    return macro if macro else [r for r in report if r["fold"] == "mean"]


def collect_reports(run_dir: Path) -> list[Path]:
    found = []
    if (run_dir / "report.csv").exists():
        found.append(run_dir / "report.csv")
    found += sorted(p / "report.csv" for p in run_dir.iterdir() if p.is_dir() and (p / "report.csv").exists())
    return found


def metric_bars(run_dir: Path, out_dir: Path, fig_format: str) -> list[Path]:
    reports = collect_reports(run_dir)
    if not reports:
        raise DataError(f"missing intermediate: no report.csv in {run_dir} or its sub-directories")
    summary: list[tuple[str, str, dict]] = []
    seen = set()
    for path in reports:
        for row in _summary_rows(read_report(path)):
            key = (row["pipeline"], row["classifier"], row["class_id"])
            if key in seen:
                continue
            seen.add(key)
            summary.append((row["pipeline"], row["classifier"], row))
    out = []
    for metric in METRIC_NAMES:
        rows = [[p, c, _fmt(r[metric])] for p, c, r in summary]
        out.append(_write_csv(out_dir / f"metric-bars-{metric}.csv", ["pipeline", "classifier", "value"], rows))
        if fig_format != "none":
            plt = _figure()
            pipes = list(dict.fromkeys(p for p, _, _ in summary))
            clfs = list(dict.fromkeys(c for _, c, _ in summary))
            fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(pipes) + 2), 3.5))
            width = 0.8 / len(clfs)
            for j, c in enumerate(clfs):
                vals = [next((float(r[metric]) for p2, c2, r in summary if p2 == p and c2 == c), np.nan)
                        for p in pipes]
                ax.bar(np.arange(len(pipes)) + j * width, vals, width, label=c)
            ax.set_xticks(np.arange(len(pipes)) + 0.4 - width / 2, pipes)
            ax.set_ylabel(metric)
            ax.set_ylim(min(0.0, ax.get_ylim()[0]), 1.05)
            ax.legend(fontsize=7)
            fig.tight_layout()
            out.append(_save(fig, out_dir / f"metric-bars-{metric}.{fig_format}", fig_format))
    return out


def emit_plots(run_dir, kind: str, out_dir=None, fig_format: str = "png",
               positive_class: int | None = None) -> list[Path]:
    """Write plot data (and, unless ``fig_format == 'none'``, a figure); return the paths."""
    if kind not in KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    if fig_format not in FIGURE_FORMATS:
        raise ConfigError(f"unknown figure format {fig_format!r}; choose from {', '.join(FIGURE_FORMATS)}")
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise DataError(f"run directory not found: {run_dir}")
    out_dir = Path(out_dir) if out_dir else run_dir / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "scatter-lwa":
        return scatter_lwa(run_dir, out_dir, fig_format)
    if kind == "pca-3d":
        return pca_3d(run_dir, out_dir, fig_format)
    if kind == "lda-1d":
        return lda_1d(run_dir, out_dir, fig_format, positive_class)
    return metric_bars(run_dir, out_dir, fig_format)
