"""Feature-extraction chains and their fold-fitted dimensionality reduction."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dimred, shape, spectral, wavelet
from .dataset import Dataset, SignalRecord
from .errors import ConfigError, DataError
from .evaluation import FeatureTable

METHODS = ("fft", "cwt-mavsap", "cwt-full", "dwt", "pwt", "cbir")
REDUCTIONS = ("none", "pca", "pca+lda")
CHANNEL_MODES = ("ch1", "ch2", "complex")

# the experiment chains that make sense for each feature method
ALLOWED_REDUCTIONS = {
    "fft": ("none",),
    "cwt-mavsap": ("none", "pca", "pca+lda"),
    "cwt-full": ("none", "pca+lda"),
    "dwt": ("none", "pca"),
    "pwt": ("none", "pca"),
    "cbir": ("none",),
}
DEFAULT_REDUCTION = {
    "fft": "none", "cwt-mavsap": "pca+lda", "cwt-full": "pca+lda",
    "dwt": "pca", "pwt": "pca", "cbir": "none",
}
DEFAULT_PCA_ENERGY = {"cwt-mavsap": 0.90, "cwt-full": 0.92, "dwt": 0.92, "pwt": 1.0}


def check_chain(method: str, reduction: str) -> None:
    if method not in METHODS:
        raise ConfigError(f"unknown feature method {method!r}; choose from {', '.join(METHODS)}")
    if reduction not in REDUCTIONS:
        raise ConfigError(f"unknown reduction {reduction!r}; choose from {', '.join(REDUCTIONS)}")
    if reduction not in ALLOWED_REDUCTIONS[method]:
        raise ConfigError(
            f"reduction {reduction!r} is not valid for method {method!r} "
            f"(allowed: {', '.join(ALLOWED_REDUCTIONS[method])})"
        )


@dataclass(frozen=True)
class FeaturePipeline:
    method: str
    channel: str = "ch1"
    denoise_q: float = 0.95
    extended: bool = False
    wavelet_name: str = "db5"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown feature method {self.method!r}")
        if self.channel not in CHANNEL_MODES:
            raise ConfigError(f"unknown channel mode {self.channel!r}")

    @property
    def binary(self) -> bool:
        return self.method == "fft"

    def extract(self, record: SignalRecord) -> np.ndarray:
        if self.method == "fft":
            return spectral.encode_fft_features(record, self.channel).bits.astype(float)
        if self.method == "cbir":
            return shape.cbir_features(record, self.denoise_q, self.extended)
        spec = wavelet.WaveletSpec.from_name(self.wavelet_name)
        return wavelet.wavelet_features(record, self.method, self.channel, spec)

    def column_names(self, dim: int) -> list[str]:
        if self.method == "fft":
            return [f"b{i}" for i in range(dim)]
        if self.method == "cbir":
            names = ["L", "W", "alpha"]
            if self.extended:
                names += list(shape.DESCRIPTOR_NAMES)
            return names
        return [f"f{i}" for i in range(dim)]


def _extract_chunk(args):
    pipeline, records = args
    return [pipeline.extract(r) for r in records]


def extract_features(dataset: Dataset, pipeline: FeaturePipeline, jobs: int = 1) -> FeatureTable:
    """Per-record features in dataset order. Extraction is stateless, so it runs once per dataset."""
    records = list(dataset.records)
    if jobs > 1 and len(records) > 1:
        chunks = [records[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_extract_chunk, [(pipeline, c) for c in chunks]))
        rows = [None] * len(records)
        for i, part in enumerate(parts):
            for j, vec in enumerate(part):
                rows[i + j * jobs] = vec
    else:
        rows = _extract_chunk((pipeline, records))
    dtype = np.float32 if pipeline.method == "cwt-full" else float
    matrix = np.vstack([np.asarray(r, dtype=dtype) for r in rows])
    return FeatureTable(tuple(dataset.record_ids), matrix, pipeline.method)


@dataclass(frozen=True, eq=False)
class FittedReduction:
    pca: dimred.PcaModel | None = None
    lda: dimred.LdaModel | None = None

    def __call__(self, X) -> np.ndarray:
        Z = np.asarray(X, dtype=float)
        if self.pca is not None:
            Z = dimred.pca_project(self.pca, Z)
        if self.lda is not None:
            Z = dimred.lda_project(self.lda, Z)
        return Z

    def to_dict(self) -> dict:
        return {
            "pca": self.pca.to_dict() if self.pca is not None else None,
            "lda": self.lda.to_dict() if self.lda is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedReduction":
        return cls(dimred.PcaModel.from_dict(d["pca"]) if d.get("pca") else None,
                   dimred.LdaModel.from_dict(d["lda"]) if d.get("lda") else None)


@dataclass(frozen=True)
class ReductionSpec:
    """Picklable factory: ``spec(X_train, y_train)`` fits and returns a :class:`FittedReduction`."""

    kind: str = "none"
    pca_energy: float = 0.90
    pca_k: int | None = None
    lda_k: int | None = None

    def __post_init__(self):
        if self.kind not in REDUCTIONS:
            raise ConfigError(f"unknown reduction {self.kind!r}")

    def __call__(self, X, y) -> FittedReduction | None:
        if self.kind == "none":
            return None
        X = np.asarray(X, dtype=float)
        pca = dimred.pca_fit(X, energy=self.pca_energy, k=self.pca_k)
        if self.kind == "pca+lda":
            n_classes = len(set(np.asarray(y).tolist()))
            # keep Sw nonsingular: at most M - C dimensions survive PCA
            cap = len(X) - n_classes
            if pca.k > cap:
                pca = dimred.pca_fit(X, k=cap)
        if pca.k == 0:
            raise DataError("PCA retained no components (training features have zero variance)")
        if self.kind == "pca":
            return FittedReduction(pca=pca)
        lda = dimred.lda_fit(dimred.pca_project(pca, X), y, self.lda_k)
        return FittedReduction(pca=pca, lda=lda)
