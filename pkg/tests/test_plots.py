import csv

import numpy as np
import pytest

from eddyclass import cli, plots
from eddyclass.errors import ConfigError, DataError


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def cbir_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cbir")
    assert cli.main(["synth", "--set", "2", "--out", str(root / "s2")]) == 0
    assert cli.main(["run", "--manifest", str(root / "s2"), "--pipeline", "cbir",
                     "--classifier", "tree", "--out", str(root / "run"), "--jobs", "2"]) == 0
    return root / "run"


def test_run_emits_scatter_and_bars(cbir_run):
    rows = _rows(cbir_run / "plots/scatter-lwa.csv")
    assert len(rows) == 240 and list(rows[0]) == ["class_id", "L", "W", "alpha"]
    L = np.array([float(r["L"]) for r in rows])
    a = np.array([float(r["alpha"]) for r in rows])
    assert np.all(L > 0) and np.all((a > -90) & (a <= 90))  # degrees
    assert (cbir_run / "plots/scatter-lwa.png").read_bytes()[:4] == b"\x89PNG"
    bars = _rows(cbir_run / "plots/metric-bars-accuracy.csv")
    assert bars == [{"pipeline": "cbir", "classifier": "tree", "value": bars[0]["value"]}]
    macro = [r for r in _rows(cbir_run / "report.csv") if r["fold"] == "macro"][0]
    assert bars[0]["value"] == macro["accuracy"]


def test_scatter_matches_shape_module(cbir_run):
    feats = plots.read_features_csv(cbir_run / "features.csv")
    ids, classes, cols, X = feats
    assert cols[:3] == ["L", "W", "alpha"]
    rows = _rows(cbir_run / "plots/scatter-lwa.csv")
    got = np.array([[float(r[k]) for k in ("L", "W", "alpha")] for r in rows])
    assert np.array_equal(got, X[:, :3])


def test_lda_and_pca_projections(cbir_run, tmp_path):
    paths = plots.emit_plots(cbir_run, "lda-1d", tmp_path, "svg", positive_class=3)
    lda = _rows(tmp_path / "lda-1d.csv")
    assert len(lda) == 240 and len({r["record_id"] for r in lda}) == 240
    assert any(p.suffix == ".svg" for p in paths)
    z = np.array([float(r["lda1"]) for r in lda])
    pos = np.array([r["class_id"] == "3" for r in lda])
    # Fisher projection separates the positive class from the rest on average
    assert abs(z[pos].mean() - z[~pos].mean()) > z[~pos].std()
    plots.emit_plots(cbir_run, "pca-3d", tmp_path, "none")
    pca = _rows(tmp_path / "pca-3d.csv")
    assert len(pca) == 240 and not (tmp_path / "pca-3d.png").exists()
    P = np.array([[float(r[c]) for c in ("pc1", "pc2", "pc3")] for r in pca])
    assert np.allclose(P.mean(axis=0), 0, atol=1e-9)
    v = P.var(axis=0)
    assert v[0] >= v[1] >= v[2]


def test_figures_are_reproducible(cbir_run, tmp_path):
    for d in ("a", "b"):
        plots.emit_plots(cbir_run, "scatter-lwa", tmp_path / d, "svg")
    assert (tmp_path / "a/scatter-lwa.svg").read_bytes() == (tmp_path / "b/scatter-lwa.svg").read_bytes()


def test_plot_cli_all_and_errors(cbir_run, tmp_path):
    assert cli.main(["plot", str(cbir_run), "--kind", "all", "--out", str(tmp_path / "p")]) == 0
    for name in ("scatter-lwa.csv", "lda-1d.csv", "pca-3d.csv", "metric-bars-mcc.csv"):
        assert (tmp_path / "p" / name).exists()
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataError):
        plots.emit_plots(empty, "scatter-lwa")
    assert cli.main(["plot", str(empty), "--kind", "metric-bars"]) == 2
    with pytest.raises(ConfigError):
        plots.emit_plots(cbir_run, "histogram")


def test_features_csv_roundtrip(tmp_path):
    X = np.random.default_rng(0).normal(size=(3, 2)) * 1e-9
    plots.write_features_csv(tmp_path / "f.csv", ["a", "b", "c"], [1, 1, 2], ["u", "v"], X)
    ids, classes, cols, back = plots.read_features_csv(tmp_path / "f.csv")
    assert ids == ["a", "b", "c"] and list(classes) == [1, 1, 2] and cols == ["u", "v"]
    assert np.array_equal(back, X)
