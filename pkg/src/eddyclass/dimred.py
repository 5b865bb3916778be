"""PCA (covariance with the 1/M convention, Gram-matrix route for N > M) and Fisher LDA."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

EIG_FLOOR = 1e-10


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (first one on ties)."""
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def select_k(eigenvalues: np.ndarray, threshold: float) -> int:
    """Smallest k whose cumulative eigenvalue fraction reaches ``threshold``."""
    if not 0 < threshold <= 1:
        raise ConfigError(f"energy threshold must lie in (0, 1], got {threshold}")
    ev = np.clip(eigenvalues, 0.0, None)
    total = ev.sum()
    if total <= 0:
        return 0
    frac = np.cumsum(ev) / total
    # slack so that a threshold of exactly 1.0 is reachable despite rounding
    return int(np.searchsorted(frac, threshold - 1e-12) + 1)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (N, k), orthonormal columns
    eigenvalues: np.ndarray  # retained, non-increasing
    energy_fraction: float
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[1]

    @property
    def dims(self) -> int:
        return len(self.mean)

    def to_dict(self) -> dict:
        return {
            "kind": "pca",
            "dims": self.dims,
            "k": self.k,
            "mean": self.mean.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "energy_fraction": self.energy_fraction,
            "total_variance": self.total_variance,
            "components": self.components.T.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        comps = np.array(d["components"], dtype=float).reshape(d["k"], d["dims"]).T
        return cls(np.array(d["mean"], dtype=float), comps, np.array(d["eigenvalues"], dtype=float),
                   float(d["energy_fraction"]), float(d["total_variance"]))


def _symmetric_eig(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue."""
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def pca_fit(data, energy: float | None = 0.90, k: int | None = None) -> PcaModel:
    """Fit PCA on ``data`` of shape (M observations, N dims).

    Give either an energy threshold in (0, 1] or an explicit ``k``; ``k`` wins.
    When N > M the eigenvectors come from the M x M Gram matrix A^T A and are
    mapped back with u = A v, then normalized.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DataError("pca_fit expects a 2-D array (observations x dims)")
    M, N = X.shape
    if M < 2:
        raise DataError(f"pca_fit needs at least 2 observations, got {M}")
    if not np.all(np.isfinite(X)):
        raise DataError("pca_fit input contains non-finite values")
    if k is not None and k < 1:
        raise ConfigError(f"explicit k must be >= 1, got {k}")
    mean = X.mean(axis=0)
    A = (X - mean).T  # N x M, columns are centered observations
    if N > M:
        gram = A.T @ A
        vals, v = _symmetric_eig(gram)
        vals = vals / M
        keep = vals > EIG_FLOOR * max(vals[0], 1.0)
        vals, v = vals[keep], v[:, keep]
        U = A @ v
        U = U / np.linalg.norm(U, axis=0)
    else:
        vals, U = _symmetric_eig(A @ A.T / M)
    vals = np.clip(vals, 0.0, None)
    total = float(vals.sum())
    if total <= 0:
        if k is not None:
            raise DataError("zero variance: all observations are identical")
        return PcaModel(mean, np.zeros((N, 0)), np.zeros(0), 1.0, 0.0)
    n_avail = int(np.sum(vals > EIG_FLOOR * vals[0]))
    if k is None:
        if energy is None:
            raise ConfigError("give an energy threshold or an explicit k")
        k = select_k(vals, energy)
    k = min(k, n_avail)
    comps = fix_signs(U[:, :k])
    return PcaModel(mean, comps, vals[:k].copy(), float(vals[:k].sum() / total), total)


def pca_project(model: PcaModel, x) -> np.ndarray:
    """Project one observation (1-D) or a batch (2-D, rows) onto the retained components."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dims:
        raise DataError(f"dimension mismatch: model has {model.dims}, input has {x.shape[-1]}")
    return (x - model.mean) @ model.components


def pca_reconstruct(model: PcaModel, z) -> np.ndarray:
    return model.mean + np.asarray(z) @ model.components.T


@dataclass(frozen=True, eq=False)
class LdaModel:
    projection: np.ndarray  # (d, k), unit columns
    eigenvalues: np.ndarray
    class_means: dict
    global_mean: np.ndarray

    @property
    def k(self) -> int:
        return self.projection.shape[1]

    @property
    def dims(self) -> int:
        return self.projection.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "lda",
            "dims": self.dims,
            "k": self.k,
            "projection": self.projection.T.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "class_means": {str(c): m.tolist() for c, m in self.class_means.items()},
            "global_mean": self.global_mean.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LdaModel":
        proj = np.array(d["projection"], dtype=float).reshape(d["k"], d["dims"]).T
        means = {c: np.array(m, dtype=float) for c, m in d["class_means"].items()}
        return cls(proj, np.array(d["eigenvalues"], dtype=float), means,
                   np.array(d["global_mean"], dtype=float))


def scatter_matrices(X: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray, dict, np.ndarray]:
    """Within-class and between-class scatter; the global mean is the mean of class means."""
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()), key=str)
    d = X.shape[1]
    Sw = np.zeros((d, d))
    means = {}
    for c in classes:
        Xc = X[labels == c]
        mc = Xc.mean(axis=0)
        means[c] = mc
        D = Xc - mc
        Sw += D.T @ D
    M = np.mean([means[c] for c in classes], axis=0)
    Sb = np.zeros((d, d))
    for c in classes:
        diff = (means[c] - M)[:, None]
        Sb += diff @ diff.T
    return Sw, Sb, means, M


def lda_fit(data, labels, k: int | None = None) -> LdaModel:
    """Leading eigenvectors of Sw^-1 Sb, solved as Sb v = lambda Sw v through a Cholesky factor of Sw.

    ``k`` defaults to, and is clamped at, C - 1.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DataError("lda_fit expects a 2-D array (observations x dims)")
    labels = np.asarray(labels)
    if len(labels) != len(X):
        raise DataError("labels and data differ in length")
    n_classes = len(set(labels.tolist()))
    if n_classes < 2:
        raise DataError("lda_fit needs at least two classes")
    if k is not None and k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    k = n_classes - 1 if k is None else min(k, n_classes - 1)
    Sw, Sb, means, M = scatter_matrices(X, labels)
    try:
        L = np.linalg.cholesky(Sw)
    except np.linalg.LinAlgError:
        raise DataError(
            "within-class scatter is singular; project onto a lower-dimensional space with PCA first"
        ) from None
    if np.min(np.abs(np.diag(L))) <= 1e-12 * max(1.0, np.max(np.abs(np.diag(L)))):
        raise DataError(
            "within-class scatter is singular; project onto a lower-dimensional space with PCA first"
        )
    Linv = np.linalg.inv(L)
    vals, Y = _symmetric_eig(Linv @ Sb @ Linv.T)
    if vals[0] <= 1e-12 * max(1.0, float(np.trace(Linv @ Sb @ Linv.T))) or vals[0] <= 0:
        raise DataError("no discriminative directions: class means coincide")
    V = Linv.T @ Y[:, :k]
    V = V / np.linalg.norm(V, axis=0)
    return LdaModel(fix_signs(V), vals[:k].copy(), means, M)


def lda_project(model: LdaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dims:
        raise DataError(f"dimension mismatch: model has {model.dims}, input has {x.shape[-1]}")
    return x @ model.projection


def save_model(model: PcaModel | LdaModel, path: Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")


def load_model(path: Path) -> PcaModel | LdaModel:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("kind") == "pca":
        return PcaModel.from_dict(d)
    if d.get("kind") == "lda":
        return LdaModel.from_dict(d)
    raise DataError(f"{path}: unknown reducer kind {d.get('kind')!r}")
