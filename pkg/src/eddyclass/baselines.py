"""Naive Bayes, a one-hidden-layer perceptron and a gain-ratio decision tree.

All classifiers, plus the U-BRAIN adapter, share ``fit(config, X, y)`` and
``predict(model, X)``.  Labels are booleans (True = positive).  Models are
immutable and serialize to kind-tagged JSON text.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import ubrain
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

KINDS = ("nb", "mlp", "tree", "ubrain")
VAR_FLOOR = 1e-9


@dataclass(frozen=True)
class MlpConfig:
    hidden_units: int = 10
    learning_rate: float = 0.3
    momentum: float = 0.2
    epochs: int = 500


@dataclass(frozen=True)
class TreeConfig:
    min_leaf: int = 2


@dataclass(frozen=True)
class UBrainSettings:
    levels: int = 16  # thermometer levels per real feature
    conflicts: str = "drop"  # or "error"
    inclusive_threshold: bool = True


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "ubrain"
    seed: int = 0
    mlp: MlpConfig = field(default_factory=MlpConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    ubrain: UBrainSettings = field(default_factory=UBrainSettings)
    standardize_features: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown classifier {self.kind!r}; choose from {', '.join(KINDS)}")
        m = self.mlp
        if m.hidden_units < 1 or m.learning_rate <= 0 or m.momentum < 0 or m.epochs < 1:
            raise ConfigError("MLP hyperparameters must be positive (epochs >= 1)")
        if self.tree.min_leaf < 1:
            raise ConfigError("tree min_leaf must be >= 1")
        if self.ubrain.levels < 2:
            raise ConfigError("ubrain levels must be >= 2")
        if self.ubrain.conflicts not in ("drop", "error"):
            raise ConfigError("ubrain conflicts policy must be 'drop' or 'error'")

    def to_dict(self) -> dict:
        return asdict(self)


def is_binary(X: np.ndarray) -> bool:
    return bool(np.all((X == 0) | (X == 1)))


def _check_training(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    if X.ndim != 2 or X.shape[1] == 0:
        raise DataError("features must be a non-empty 2-D array")
    if len(X) != len(y):
        raise DataError("features and labels differ in length")
    if y.all() or (~y).all():
        raise DataError("training set needs at least one instance of each label")
    if not np.all(np.isfinite(X)):
        raise DataError("features contain non-finite values")
    return X, y


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        std = X.std(axis=0)
        std[std == 0] = 1.0
        return cls(X.mean(axis=0), std)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"]), np.array(d["std"]))


@dataclass(frozen=True, eq=False)
class ThermometerBinarizer:
    """Bit t of feature f is ``x_f > thresholds_f[t]``; thresholds are training quantiles."""

    thresholds: tuple[np.ndarray, ...]

    @classmethod
    def fit(cls, X: np.ndarray, levels: int) -> "ThermometerBinarizer":
        qs = np.arange(1, levels) / levels
        ths = []
        for col in X.T:
            t = np.unique(np.quantile(col, qs))
            # a threshold at the column maximum yields an all-zero bit
            t = t[t < col.max()] if col.max() > col.min() else t[:0]
            ths.append(t)
        return cls(tuple(ths))

    @property
    def n_bits(self) -> int:
        return int(sum(len(t) for t in self.thresholds))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != len(self.thresholds):
            raise DataError(f"dimension mismatch: binarizer has {len(self.thresholds)}, input has {X.shape[1]}")
        cols = [(X[:, [f]] > t[None, :]) for f, t in enumerate(self.thresholds)]
        return np.hstack(cols).astype(float) if cols else np.zeros((len(X), 0))

    def to_dict(self):
        return {"thresholds": [t.tolist() for t in self.thresholds]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(np.array(t, dtype=float) for t in d["thresholds"]))


# --------------------------------------------------------------------------
# Naive Bayes
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    dims: int
    binary: bool
    log_prior: np.ndarray  # [negative, positive]
    mean: np.ndarray  # (2, d) gaussian means or bernoulli rates
    var: np.ndarray  # (2, d) gaussian variances (unused for bits)
    scaler: Standardizer | None = None
    kind: str = "nb"

    def log_posterior(self, X: np.ndarray) -> np.ndarray:
        if self.scaler is not None:
            X = self.scaler(X)
        out = np.empty((len(X), 2))
        for c in range(2):
            if self.binary:
                p = self.mean[c]
                ll = X * np.log(p) + (1 - X) * np.log1p(-p)
            else:
                v = self.var[c]
                ll = -0.5 * (np.log(2 * np.pi * v) + (X - self.mean[c]) ** 2 / v)
            out[:, c] = self.log_prior[c] + ll.sum(axis=1)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        lp = self.log_posterior(X)
        # ties go to the label with the larger prior, then to positive
        first = 1 if self.log_prior[1] >= self.log_prior[0] else 0
        second = 1 - first
        return np.where(lp[:, second] > lp[:, first], second, first).astype(bool)

    def to_dict(self):
        return {"kind": "nb", "dims": self.dims, "binary": self.binary,
                "log_prior": self.log_prior.tolist(), "mean": self.mean.tolist(),
                "var": self.var.tolist(),
                "scaler": self.scaler.to_dict() if self.scaler else None}

    @classmethod
    def from_dict(cls, d):
        return cls(d["dims"], d["binary"], np.array(d["log_prior"]), np.array(d["mean"]),
                   np.array(d["var"]), Standardizer.from_dict(d["scaler"]) if d["scaler"] else None)


def fit_naive_bayes(config: ClassifierConfig, X: np.ndarray, y: np.ndarray) -> NaiveBayesModel:
    binary = is_binary(X)
    scaler = Standardizer.fit(X) if (config.standardize_features and not binary) else None
    Z = scaler(X) if scaler else X
    counts = np.array([(~y).sum(), y.sum()], dtype=float)
    log_prior = np.log(counts / counts.sum())
    mean = np.empty((2, X.shape[1]))
    var = np.empty((2, X.shape[1]))
    for c, mask in enumerate((~y, y)):
        Zc = Z[mask]
        if binary:
            mean[c] = (Zc.sum(axis=0) + 1.0) / (len(Zc) + 2.0)
            var[c] = 0.0
        else:
            mean[c] = Zc.mean(axis=0)
            var[c] = np.maximum(Zc.var(axis=0), VAR_FLOOR)
    return NaiveBayesModel(X.shape[1], binary, log_prior, mean, var, scaler)


# --------------------------------------------------------------------------
# Multilayer perceptron
# --------------------------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    scaler: Standardizer | None = None
    loss_history: tuple[float, ...] = ()
    kind: str = "mlp"

    @property
    def dims(self) -> int:
        return self.W1.shape[0]

    def output(self, X: np.ndarray) -> np.ndarray:
        if self.scaler is not None:
            X = self.scaler(X)
        H = _sigmoid(X @ self.W1 + self.b1)
        return _sigmoid(H @ self.W2 + self.b2).ravel()

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.output(X) >= 0.5

    def to_dict(self):
        return {"kind": "mlp", "W1": self.W1.tolist(), "b1": self.b1.tolist(),
                "W2": self.W2.tolist(), "b2": self.b2.tolist(),
                "scaler": self.scaler.to_dict() if self.scaler else None}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["W1"]), np.array(d["b1"]), np.array(d["W2"]), np.array(d["b2"]),
                   Standardizer.from_dict(d["scaler"]) if d["scaler"] else None)


def _cross_entropy(o: np.ndarray, t: np.ndarray) -> float:
    o = np.clip(o, 1e-12, 1 - 1e-12)
    return float(-np.mean(t * np.log(o) + (1 - t) * np.log(1 - o)))


def fit_mlp(config: ClassifierConfig, X: np.ndarray, y: np.ndarray) -> MlpModel:
    """Full-batch gradient descent with momentum on mean cross-entropy."""
    cfg = config.mlp
    scaler = Standardizer.fit(X) if (config.standardize_features and not is_binary(X)) else None
    Z = scaler(X) if scaler else X
    t = y.astype(float)[:, None]
    rng = np.random.default_rng(config.seed)
    d, h = Z.shape[1], cfg.hidden_units
    W1 = rng.uniform(-0.5, 0.5, (d, h))
    b1 = rng.uniform(-0.5, 0.5, h)
    W2 = rng.uniform(-0.5, 0.5, (h, 1))
    b2 = rng.uniform(-0.5, 0.5, 1)
    vel = [np.zeros_like(W1), np.zeros_like(b1), np.zeros_like(W2), np.zeros_like(b2)]
    n = len(Z)
    history = []
    for _ in range(cfg.epochs):
        H = _sigmoid(Z @ W1 + b1)
        O = _sigmoid(H @ W2 + b2)
        history.append(_cross_entropy(O.ravel(), t.ravel()))
        delta_o = (O - t) / n
        delta_h = (delta_o @ W2.T) * H * (1 - H)
        grads = [Z.T @ delta_h, delta_h.sum(axis=0), H.T @ delta_o, delta_o.sum(axis=0)]
        params = [W1, b1, W2, b2]
        for p, v, g in zip(params, vel, grads):
            v *= cfg.momentum
            v -= cfg.learning_rate * g
            p += v
    return MlpModel(W1, b1, W2, b2, scaler, tuple(history))


# --------------------------------------------------------------------------
# Decision tree
# --------------------------------------------------------------------------

def _entropy(pos: float, total: float) -> float:
    if total == 0 or pos == 0 or pos == total:
        return 0.0
    p = pos / total
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def _candidate_splits(x: np.ndarray, y: np.ndarray):
    """Yield (threshold, left_mask) at midpoints between adjacent distinct values.

    Cuts between two value groups that are pure in the same label are skipped:
    they can never be optimal.
    """
    values = np.unique(x)
    if len(values) < 2:
        return
    purity = []
    for v in values:
        yy = y[x == v]
        purity.append(1 if yy.all() else (0 if not yy.any() else -1))
    for i in range(len(values) - 1):
        if purity[i] != -1 and purity[i] == purity[i + 1]:
            continue
        thr = (values[i] + values[i + 1]) / 2.0
        yield thr, x <= thr


def best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """C4.5 selection: best gain ratio among candidates whose information gain is at least average.

    Returns (feature, threshold, gain_ratio, gain) or None.
    """
    n = len(y)
    base = _entropy(y.sum(), n)
    cands = []
    for f in range(X.shape[1]):
        for thr, left in _candidate_splits(X[:, f], y):
            nl = int(left.sum())
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            gain = base - (nl * _entropy(y[left].sum(), nl) + nr * _entropy(y[~left].sum(), nr)) / n
            split_info = _entropy(nl, n)
            cands.append((f, thr, gain / split_info, gain))
    if not cands:
        return None
    avg_gain = np.mean([c[3] for c in cands])
    eligible = [c for c in cands if c[3] >= avg_gain - 1e-12]
    return max(eligible, key=lambda c: (c[2], -c[0], -c[1]))


@dataclass(frozen=True)
class TreeNode:
    label: bool
    count: int
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self):
        d = {"label": self.label, "count": self.count}
        if not self.is_leaf:
            d.update(feature=self.feature, threshold=self.threshold,
                     left=self.left.to_dict(), right=self.right.to_dict())
        return d

    @classmethod
    def from_dict(cls, d):
        if "feature" not in d:
            return cls(d["label"], d["count"])
        return cls(d["label"], d["count"], d["feature"], d["threshold"],
                   cls.from_dict(d["left"]), cls.from_dict(d["right"]))


def _grow(X: np.ndarray, y: np.ndarray, min_leaf: int) -> TreeNode:
    n_pos = int(y.sum())
    label = n_pos * 2 >= len(y)
    if n_pos == 0 or n_pos == len(y) or len(y) < 2 * min_leaf:
        return TreeNode(label, len(y))
    split = best_split(X, y, min_leaf)
    if split is None:
        return TreeNode(label, len(y))
    f, thr, _, _ = split
    left = X[:, f] <= thr
    return TreeNode(label, len(y), f, float(thr),
                    _grow(X[left], y[left], min_leaf), _grow(X[~left], y[~left], min_leaf))


@dataclass(frozen=True, eq=False)
class TreeModel:
    root: TreeNode
    dims: int
    kind: str = "tree"

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X), dtype=bool)
        for i, x in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if x[node.feature] <= node.threshold else node.right
            out[i] = node.label
        return out

    def depth(self) -> int:
        def _d(node):
            return 0 if node.is_leaf else 1 + max(_d(node.left), _d(node.right))
        return _d(self.root)

    def to_dict(self):
        return {"kind": "tree", "dims": self.dims, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(TreeNode.from_dict(d["root"]), d["dims"])


def fit_tree(config: ClassifierConfig, X: np.ndarray, y: np.ndarray) -> TreeModel:
    return TreeModel(_grow(X, y, config.tree.min_leaf), X.shape[1])


# --------------------------------------------------------------------------
# U-BRAIN adapter
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UBrainModel:
    formula: ubrain.DnfFormula
    dims: int
    binarizer: ThermometerBinarizer | None = None
    inclusive: bool = True
    dropped_conflicts: int = 0
    kind: str = "ubrain"

    def encode(self, X: np.ndarray) -> np.ndarray:
        return self.binarizer(X) if self.binarizer is not None else X

    def predict(self, X: np.ndarray) -> np.ndarray:
        return ubrain.classify_batch(self.formula, self.encode(X), self.inclusive)

    def to_dict(self):
        return {"kind": "ubrain", "dims": self.dims, "n": self.formula.n,
                "formula": ubrain.format_formula(self.formula),
                "binarizer": self.binarizer.to_dict() if self.binarizer else None,
                "inclusive": self.inclusive, "dropped_conflicts": self.dropped_conflicts}

    @classmethod
    def from_dict(cls, d):
        return cls(ubrain.parse_formula(d["formula"], d["n"]), d["dims"],
                   ThermometerBinarizer.from_dict(d["binarizer"]) if d["binarizer"] else None,
                   d["inclusive"], d.get("dropped_conflicts", 0))


def fit_ubrain(config: ClassifierConfig, X: np.ndarray, y: np.ndarray) -> UBrainModel:
    settings = config.ubrain
    binarizer = None
    if not np.all(np.isin(X, ubrain._VALID)):
        binarizer = ThermometerBinarizer.fit(X, settings.levels)
    B = binarizer(X) if binarizer else X
    pos, neg = B[y], B[~y]
    dropped = 0
    if settings.conflicts == "drop":
        pos, neg, dropped = ubrain.drop_conflicts(pos, neg)
        if dropped:
            log.info("U-BRAIN: dropped %d pattern(s) present in both classes", dropped)
        if len(pos) == 0 or len(neg) == 0:
            raise DataError("no consistent training instances left after dropping conflicts")
    cfg = ubrain.UBrainConfig(inclusive_threshold=settings.inclusive_threshold)
    formula = ubrain.train(pos, neg, cfg)
    return UBrainModel(formula, X.shape[1], binarizer, settings.inclusive_threshold, dropped)


# --------------------------------------------------------------------------
# Contract
# --------------------------------------------------------------------------

_FITTERS = {"nb": fit_naive_bayes, "mlp": fit_mlp, "tree": fit_tree, "ubrain": fit_ubrain}
_LOADERS = {"nb": NaiveBayesModel, "mlp": MlpModel, "tree": TreeModel, "ubrain": UBrainModel}


def fit(config: ClassifierConfig, features, labels):
    X, y = _check_training(features, labels)
    return _FITTERS[config.kind](config, X, y)


def predict(model, features) -> np.ndarray:
    """Predict one vector (returns a bool) or a batch of rows (returns a bool array)."""
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.dims:
        raise DataError(f"dimension mismatch: model has {model.dims}, input has {X.shape[1]}")
    out = model.predict(X)
    return bool(out[0]) if single else out


def model_to_text(model) -> str:
    return json.dumps(model.to_dict()) + "\n"


def model_from_text(text: str):
    d = json.loads(text)
    kind = d.get("kind")
    if kind not in _LOADERS:
        raise DataError(f"unknown model kind {kind!r}")
    return _LOADERS[kind].from_dict(d)


def save_model(model, path: Path) -> None:
    Path(path).write_text(model_to_text(model), encoding="utf-8")


def load_model(path: Path):
    return model_from_text(Path(path).read_text(encoding="utf-8"))


def with_overrides(config: ClassifierConfig, **kw) -> ClassifierConfig:
    return replace(config, **kw)
