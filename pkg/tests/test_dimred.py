import numpy as np
import pytest

from eddyclass import dimred
from eddyclass.errors import ConfigError, DataError


def direct_pca(X, k):
    """Oracle: eigendecomposition of the N x N covariance (1/M convention)."""
    D = X - X.mean(axis=0)
    vals, vecs = np.linalg.eigh(D.T @ D / len(X))
    order = np.argsort(vals)[::-1][:k]
    return vals[order], vecs[:, order]


def test_gram_trick_matches_direct_covariance():
    rng = np.random.default_rng(0)
    for _ in range(100):
        X = rng.normal(size=(5, 8))  # M < N forces the Gram path
        model = dimred.pca_fit(X, k=4)
        vals, vecs = direct_pca(X, 4)
        assert np.allclose(model.eigenvalues, vals, atol=1e-10)
        Z = dimred.pca_project(model, X)
        Zref = (X - X.mean(axis=0)) @ vecs
        for j in range(4):
            col = Z[:, j]
            ref = Zref[:, j]
            assert min(np.max(np.abs(col - ref)), np.max(np.abs(col + ref))) < 1e-8


def _spectrum_data(eigs, seed=0):
    """Observations +-a_i q_i whose 1/M covariance has exactly the eigenvalues ``eigs``."""
    n = len(eigs)
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(n, n)))
    rows = []
    for i, lam in enumerate(eigs):
        a = np.sqrt(lam * n)  # 2n observations, each pair contributes 2a^2/(2n)
        rows += [a * q[:, i], -a * q[:, i]]
    return np.array(rows)


def test_energy_threshold_selects_four():
    eigs = [40.0, 25.0, 15.0, 10.0, 4.0, 3.0, 2.0, 1.0]  # first four hold exactly 90%
    X = _spectrum_data(eigs)
    model = dimred.pca_fit(X, energy=0.90)
    assert model.k == 4
    assert np.allclose(model.eigenvalues, eigs[:4])
    assert dimred.select_k(np.array(eigs), 0.90) == 4
    assert dimred.select_k(np.array(eigs), 0.91) == 5


def test_energy_threshold_is_minimal():
    rng = np.random.default_rng(1)
    for _ in range(50):
        ev = np.sort(rng.uniform(0, 1, 10))[::-1]
        t = rng.uniform(0.1, 1.0)
        k = dimred.select_k(ev, t)
        frac = np.cumsum(ev) / ev.sum()
        assert frac[k - 1] >= t - 1e-12
        assert k == 1 or frac[k - 2] < t


def test_reconstruction_error_equals_discarded_eigenvalues():
    rng = np.random.default_rng(2)
    for M, N in [(20, 6), (6, 30)]:
        X = rng.normal(size=(M, N)) @ rng.normal(size=(N, N))
        full = dimred.pca_fit(X, energy=1.0)
        model = dimred.pca_fit(X, k=3)
        R = dimred.pca_reconstruct(model, dimred.pca_project(model, X))
        err = np.mean(np.sum((X - R) ** 2, axis=1))
        assert err == pytest.approx(full.eigenvalues[3:].sum(), abs=1e-8)


def test_projection_of_mean_and_component():
    X = np.random.default_rng(3).normal(size=(10, 4))
    m = dimred.pca_fit(X, k=3)
    assert np.allclose(dimred.pca_project(m, m.mean), 0)
    z = dimred.pca_project(m, m.mean + 2.5 * m.components[:, 0])
    assert np.allclose(z, [2.5, 0, 0], atol=1e-10)


def test_pca_signs_and_errors():
    X = np.random.default_rng(4).normal(size=(10, 4))
    comps = dimred.pca_fit(X, k=4).components
    idx = np.argmax(np.abs(comps), axis=0)
    assert np.all(comps[idx, np.arange(4)] > 0)
    with pytest.raises(DataError, match="zero variance"):
        dimred.pca_fit(np.ones((5, 3)), k=2)
    assert dimred.pca_fit(np.ones((5, 3))).k == 0
    with pytest.raises(ConfigError):
        dimred.select_k(np.ones(3), 0.0)


def test_lda_worked_example():
    X = np.array([[0, 0], [1, 0], [0, 1], [4, 0], [5, 0], [4, 1]], float)
    y = np.array([0, 0, 0, 1, 1, 1])
    model = dimred.lda_fit(X, y, k=5)
    assert model.k == 1  # clamped to C - 1
    w = model.projection[:, 0]
    assert abs(abs(w @ np.array([2, 1]) / np.sqrt(5)) - 1) < 1e-12
    assert abs(dimred.lda_project(model, np.array([2.0, 1.0]))[0]) == pytest.approx(np.sqrt(5))


def test_lda_parallel_to_fisher_direction():
    rng = np.random.default_rng(5)
    for _ in range(100):
        d = int(rng.integers(2, 6))
        A = rng.normal(size=(12, d))
        B = rng.normal(size=(12, d)) + rng.normal(size=d)
        X = np.vstack([A, B])
        y = np.array([0] * 12 + [1] * 12)
        Sw = sum((G - G.mean(0)).T @ (G - G.mean(0)) for G in (A, B))
        ref = np.linalg.solve(Sw, A.mean(0) - B.mean(0))
        w = dimred.lda_fit(X, y).projection[:, 0]
        cos = abs(w @ ref) / (np.linalg.norm(w) * np.linalg.norm(ref))
        assert np.arccos(min(cos, 1.0)) < 1e-6


def test_lda_errors():
    X = np.random.default_rng(6).normal(size=(6, 10))
    y = np.array([0, 0, 0, 1, 1, 1])
    with pytest.raises(DataError, match="PCA"):
        dimred.lda_fit(X, y)
    Z = np.array([[0, 0], [1, 1], [2, 0], [0, 0], [1, 1], [2, 0]], float)
    with pytest.raises(DataError, match="no discriminative"):
        dimred.lda_fit(Z, y)


def test_model_roundtrip(tmp_path):
    X = np.random.default_rng(7).normal(size=(10, 4))
    m = dimred.pca_fit(X, k=2)
    dimred.save_model(m, tmp_path / "pca.json")
    back = dimred.load_model(tmp_path / "pca.json")
    assert np.array_equal(dimred.pca_project(back, X), dimred.pca_project(m, X))
