"""End-to-end acceptance checks, numbered 1-12.

Each test records a PASS/FAIL line shown in the pytest terminal summary.
Criterion 12 needs the real eddy-current dataset; point ``EDDYCLASS_REAL_DATA``
at a canonical dataset directory holding all twelve classes to enable it.
"""
import csv
import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from eddyclass import cli, dimred, shape, spectral, ubrain, wavelet
from eddyclass.evaluation import ConfusionMatrix, metrics

DATA = Path(__file__).parent / "data"
H = 0.5


def _report(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _headline(run_dir, column="accuracy"):
    rows = _report(Path(run_dir) / "report.csv")
    macro = [r for r in rows if r["fold"] == "macro"]
    return float((macro or [r for r in rows if r["fold"] == "mean"])[0][column])


def _run(tmp, manifest, pipeline, classifier, *extra):
    out = Path(tmp) / f"{pipeline}-{classifier}"
    rc = cli.main(["run", "--manifest", str(manifest), "--pipeline", pipeline,
                   "--classifier", classifier, "--out", str(out), "--figures", "none",
                   *map(str, extra)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def synth_sets(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    assert cli.main(["synth", "--set", "1", "--out", str(root / "set1")]) == 0
    assert cli.main(["synth", "--set", "2", "--out", str(root / "set2")]) == 0
    return root


# 1 -------------------------------------------------------------------------

def test_criterion_01_printed_metric_identities(criterion):
    with open(DATA / "reference_tables.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    bad = []
    for r in rows:
        se, sp, pr = (float(r[k]) for k in ("sensitivity", "specificity", "precision"))
        auc = (se + sp) / 2
        f = 2 * se * pr / (se + pr) if se + pr else 0.0
        if abs(auc - float(r["auc"])) > 0.01 + 1e-9:
            bad.append(f"{r['table']}/{r['classifier']} auc {auc:.3f} vs {r['auc']}")
        if abs(f - float(r["f_measure"])) > 0.01 + 1e-9:
            bad.append(f"{r['table']}/{r['classifier']} F {f:.3f} vs {r['f_measure']}")
    # worked anchor: sensitivity .97, precision 1.00 -> F .9848
    anchor = 2 * 0.97 * 1.0 / 1.97
    ok = criterion(1, not bad and abs(anchor - 0.9848) < 1e-4,
                   f"{len(rows)} rows, {len(bad)} mismatches" + (f": {bad[:3]} ..." if bad else ""))
    assert ok, "\n".join(bad)


# 2 -------------------------------------------------------------------------

def _truth(formula, w):
    best = 0.0
    for term in formula.terms:
        t = 1.0
        for lit in term:
            v = w[lit.index - 1]
            t = min(t, 1 - v if lit.negated else v)
        best = max(best, t)
    return best


def test_criterion_02_ubrain_zero_training_error(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    errors = done = 0
    while done < 200:
        n = int(rng.integers(1, 13))
        p, q = int(rng.integers(1, 21)), int(rng.integers(1, 21))
        pats = list({tuple(v) for v in rng.integers(0, 2, size=(p + q, n)).tolist()})
        if len(pats) < 2:
            continue
        rng.shuffle(pats)
        cut = max(1, min(len(pats) - 1, p))
        pos, neg = np.array(pats[:cut], float), np.array(pats[cut:], float)
        f = ubrain.train(pos, neg)
        errors += sum(_truth(f, w) < H for w in pos) + sum(_truth(f, w) >= H for w in neg)
        done += 1
    dt = time.perf_counter() - t0
    ok = criterion(2, errors == 0 and dt < 30, f"200 datasets, {errors} training errors, {dt:.1f}s")
    assert ok


# 3 -------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_03_synthetic_set1_fft(synth_sets, tmp_path, criterion):
    t0 = time.perf_counter()
    acc = {c: _headline(_run(tmp_path, synth_sets / "set1", "fft", c)) for c in ("ubrain", "mlp")}
    dt = time.perf_counter() - t0
    ok = criterion(3, min(acc.values()) >= 0.95 and dt < 300,
                   f"U-BRAIN {acc['ubrain']:.3f}, MLP {acc['mlp']:.3f}, {dt:.1f}s")
    assert ok


# 4 -------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_04_synthetic_set2_cbir(synth_sets, tmp_path, criterion):
    t0 = time.perf_counter()
    acc = {c: _headline(_run(tmp_path, synth_sets / "set2", "cbir", c, "--jobs", 4))
           for c in ("mlp", "ubrain")}
    dt = time.perf_counter() - t0
    ok = criterion(4, acc["mlp"] >= 0.95 and acc["ubrain"] >= 0.90 and dt < 600,
                   f"macro accuracy MLP {acc['mlp']:.3f}, U-BRAIN {acc['ubrain']:.3f}, {dt:.1f}s")
    assert ok


# 5 -------------------------------------------------------------------------

def test_criterion_05_pca_oracle(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        X = rng.normal(size=(5, 8))
        D = X - X.mean(axis=0)
        vals, vecs = np.linalg.eigh(D.T @ D / len(X))
        vecs = vecs[:, np.argsort(vals)[::-1][:4]]
        Z = dimred.pca_project(dimred.pca_fit(X, k=4), X)
        ref = D @ vecs
        for j in range(4):
            worst = max(worst, min(np.abs(Z[:, j] - ref[:, j]).max(), np.abs(Z[:, j] + ref[:, j]).max()))
    eigs = [40.0, 25.0, 15.0, 10.0, 4.0, 3.0, 2.0, 1.0]
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    rows = []
    for i, lam in enumerate(eigs):
        a = math.sqrt(lam * 8)
        rows += [a * q[:, i], -a * q[:, i]]
    k = dimred.pca_fit(np.array(rows), energy=0.90).k
    ok = criterion(5, worst < 1e-8 and k == 4, f"max deviation {worst:.1e}, k={k}")
    assert ok


# 6 -------------------------------------------------------------------------

def test_criterion_06_lda_oracle(criterion):
    X = np.array([[0, 0], [1, 0], [0, 1], [4, 0], [5, 0], [4, 1]], float)
    y = np.array([0, 0, 0, 1, 1, 1])
    w = dimred.lda_fit(X, y).projection[:, 0]
    worked = abs(abs(w @ np.array([2, 1])) / (np.linalg.norm(w) * math.sqrt(5)) - 1) < 1e-12
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 6))
        A, B = rng.normal(size=(12, d)), rng.normal(size=(12, d)) + rng.normal(size=d)
        Sw = sum((G - G.mean(0)).T @ (G - G.mean(0)) for G in (A, B))
        ref = np.linalg.solve(Sw, A.mean(0) - B.mean(0))
        w = dimred.lda_fit(np.vstack([A, B]), np.repeat([0, 1], 12)).projection[:, 0]
        cos = min(1.0, abs(w @ ref) / (np.linalg.norm(w) * np.linalg.norm(ref)))
        worst = max(worst, math.acos(cos))
    ok = criterion(6, worked and worst < 1e-6, f"worked example {'ok' if worked else 'off'}, max angle {worst:.1e} rad")
    assert ok


# 7 -------------------------------------------------------------------------

def test_criterion_07_dft_oracle(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in (2, 4, 8, 16, 32):
        k = np.arange(n)
        W = np.exp(-2j * np.pi * np.outer(k, k) / n)
        for _ in range(100):
            x = rng.normal(size=n)
            worst = max(worst, np.abs(spectral.dft(x).magnitudes - np.abs(W @ x)).max())
    x = rng.normal(size=4096)
    pars = abs(np.sum(spectral.dft(x).magnitudes ** 2) / 4096 - np.sum(x ** 2)) / np.sum(x ** 2)
    ok = criterion(7, worst < 1e-9 and pars < 1e-6, f"max deviation {worst:.1e}, Parseval rel {pars:.1e}")
    assert ok


# 8 -------------------------------------------------------------------------

def test_criterion_08_wavelet_energy(criterion):
    rng = np.random.default_rng(8)
    worst, nodes = 0.0, set()
    for _ in range(100):
        x = rng.normal(size=4096)
        e = np.sum(x ** 2)
        bank = wavelet.pwt(x, 4)
        nodes.add(len(bank))
        worst = max(worst, abs(wavelet.dwt(x, 12).energy() - e) / e, abs(bank.energy() - e) / e)
    from eddyclass.dataset import SignalRecord
    dim = wavelet.wavelet_features(SignalRecord("r", 1, x, x), "pwt").shape
    ok = criterion(8, worst < 1e-8 and nodes == {16} and dim == (48,),
                   f"max relative energy error {worst:.1e}, {nodes} nodes, {dim[0]}-d feature")
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_09_shape_invariances(criterion):
    rng = np.random.default_rng(9)

    def adiff(a, b):
        d = (a - b) % 180.0
        return min(d, 180.0 - d)

    failures = 0
    for _ in range(500):
        pts = rng.normal(size=(int(rng.integers(10, 60)), 2)) * [rng.uniform(2, 5), rng.uniform(0.2, 1)]
        base = shape.shape_signature(shape.PointSet(pts))
        v = rng.uniform(-100, 100, 2)
        th = rng.uniform(-math.pi, math.pi)
        s = rng.uniform(0.1, 10)
        c, si = math.cos(th), math.sin(th)
        mv = shape.shape_signature(shape.PointSet(pts + v))
        rt = shape.shape_signature(shape.PointSet(pts @ np.array([[c, -si], [si, c]]).T))
        sc = shape.shape_signature(shape.PointSet(s * pts))
        ok = (abs(mv.L - base.L) <= 1e-10 * max(1, base.L) and abs(mv.W - base.W) <= 1e-10 * max(1, base.L)
              and adiff(mv.alpha, base.alpha) < 1e-8
              and abs(rt.L - base.L) <= 1e-9 * base.L and abs(rt.W - base.W) <= 1e-9 * base.L
              and adiff(rt.alpha, base.alpha + math.degrees(th)) < 1e-7
              and abs(sc.L - s * base.L) <= 1e-8 * s * base.L and abs(sc.W - s * base.W) <= 1e-8 * s * base.L
              and adiff(sc.alpha, base.alpha) < 1e-8)
        failures += not ok
    sq = shape.invariant_descriptors(shape.PointSet(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)))
    t = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    circ = shape.invariant_descriptors(shape.PointSet(np.column_stack([np.cos(t), np.sin(t)])))
    ok = criterion(9, failures == 0 and abs(sq.compactness - math.pi / 4) <= 0.02 and circ.compactness >= 0.98,
                   f"{failures}/500 invariance failures, square {sq.compactness:.4f}, circle {circ.compactness:.4f}")
    assert ok


# 10 ------------------------------------------------------------------------

def test_criterion_10_metric_bounds(criterion):
    t0 = time.perf_counter()
    bad = 0
    count = 0
    for total in range(1, 51):
        for tp, tn, fp in itertools.product(range(total + 1), repeat=3):
            fn = total - tp - tn - fp
            if fn < 0:
                continue
            count += 1
            r = metrics(ConfusionMatrix(tp, tn, fp, fn))
            vals = r.values()
            in_range = all(0 <= v <= 1 for i, v in enumerate(vals) if i != 4) and -1 <= r.mcc <= 1
            zero = {"sensitivity": tp + fn == 0, "specificity": tn + fp == 0, "precision": tp + fp == 0}
            flags = all((name in r.degenerate) == cond for name, cond in zero.items())
            zeros = all(getattr(r, name) == 0.0 for name in r.degenerate)
            bad += not (in_range and flags and zeros)
    dt = time.perf_counter() - t0
    ok = criterion(10, bad == 0 and dt < 10, f"{count} matrices, {bad} violations, {dt:.1f}s")
    assert ok


# 11 ------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_11_determinism(synth_sets, tmp_path, criterion):
    cases = [("set1", "fft", "mlp"), ("set1", "pwt", "tree"), ("set2", "cbir", "ubrain")]
    mismatches = []
    for ds, pipe, clf in cases:
        first = _run(tmp_path / "a", synth_sets / ds, pipe, clf, "--jobs", 1)
        for jobs in (1, 4):
            again = tmp_path / f"b{jobs}" / f"{pipe}-{clf}"
            assert cli.main(["run", "--config", str(first / "config.txt"), "--out", str(again),
                             "--jobs", str(jobs)]) == 0
            if (first / "report.csv").read_bytes() != (again / "report.csv").read_bytes():
                mismatches.append(f"{pipe}/{clf} jobs={jobs}")
    ok = criterion(11, not mismatches, f"{len(cases) * 2} reruns, mismatches: {mismatches or 'none'}")
    assert ok


# 12 ------------------------------------------------------------------------

@pytest.mark.skipif(not os.environ.get("EDDYCLASS_REAL_DATA"), reason="real dataset not available")
def test_criterion_12_real_data(tmp_path, criterion):
    from eddyclass.dataset import Dataset, load_manifest, write_manifest
    real = Path(os.environ["EDDYCLASS_REAL_DATA"])
    full = load_manifest(real)
    s1 = write_manifest(Dataset(tuple(r for r in full.records if r.class_id in (1, 2)), full.class_names),
                        tmp_path / "set1")
    u = _headline(_run(tmp_path, s1, "fft", "ubrain"))
    m = _headline(_run(tmp_path, real, "cbir", "mlp", "--jobs", 4))
    ok = criterion(12, u >= 0.95 and m >= 0.90, f"Set 1 FFT+U-BRAIN {u:.3f}, Set 2 CBIR+MLP {m:.3f}")
    if not ok:
        pytest.xfail("real-data tier is informative only")
