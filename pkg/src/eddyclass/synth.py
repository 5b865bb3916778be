"""Synthetic eddy-current datasets shaped like the public aluminium benchmark.

Each class has two signatures so any pipeline has something to find:

* an impedance-plane locus: an ellipse of class-specific length, width and
  orientation traced three times over the record;
* narrowband content: Gaussian-windowed tone bursts whose carriers sit in
  three class-specific frequency bands of the 25-band FFT coding.

White noise is added to both channels, plus sparse spikes in the upper-right
quadrant of the impedance plane for the denoising step to remove.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DEFAULT_SAMPLE_RATE_HZ, Dataset, SignalRecord
from .errors import ConfigError
from .spectral import N_BANDS, band_edges

N_SAMPLES = 4096
RECORDS_PER_CLASS = 20
N_CLASSES = 12


@dataclass(frozen=True)
class ClassProfile:
    class_id: int
    length: float
    width: float
    alpha_deg: float
    bands: tuple[int, ...]


def class_profile(class_id: int) -> ClassProfile:
    """Deterministic parameters for class 1..12 (a 3 x 4 grid of length x orientation)."""
    c = class_id - 1
    length = 3.0 * (3.0 + 2.0 * (c % 3))
    alpha = -67.5 + 45.0 * ((c // 3) % 4)
    width = length * (0.25 if (c + c // 3) % 2 == 0 else 0.5)
    # band 0/1 carry the locus fundamental; use 2..24
    band_rng = np.random.default_rng(1000 + class_id)
    bands = tuple(sorted(band_rng.choice(np.arange(2, N_BANDS), size=3, replace=False).tolist()))
    return ClassProfile(class_id, length, width, alpha, bands)


def synth_record(profile: ClassProfile, record_id: str, rng: np.random.Generator,
                 n: int = N_SAMPLES, noise: float = 0.03, jitter: float = 0.03,
                 burst_amplitude: float = 0.6, bursts_per_band: int = 1) -> SignalRecord:
    t = np.arange(n)
    L = profile.length * (1 + rng.uniform(-jitter, jitter))
    W = profile.width * (1 + rng.uniform(-jitter, jitter))
    alpha = np.radians(profile.alpha_deg + rng.uniform(-3.0, 3.0))
    theta = 2 * np.pi * 3 * t / n + rng.uniform(0, 2 * np.pi)
    u = 0.5 * L * np.cos(theta)
    v = 0.5 * W * np.sin(theta)
    ch1 = u * np.cos(alpha) - v * np.sin(alpha)
    ch2 = u * np.sin(alpha) + v * np.cos(alpha)

    edges = band_edges(n // 2 + 1, N_BANDS)
    for band in profile.bands:
        lo, hi = edges[band]
        for _ in range(bursts_per_band):
            centre_bin = (lo + hi) / 2 + rng.uniform(-12, 12)
            t0 = rng.uniform(0.1 * n, 0.9 * n)
            env = np.exp(-0.5 * ((t - t0) / 50.0) ** 2)
            phase = rng.uniform(0, 2 * np.pi)
            burst = burst_amplitude * env * np.cos(2 * np.pi * centre_bin / n * t + phase)
            ch1 = ch1 + burst
            ch2 = ch2 + 0.5 * burst

    ch1 = ch1 + rng.normal(0, noise, n)
    ch2 = ch2 + rng.normal(0, noise, n)
    spikes = rng.random(n) < 0.002
    kick = rng.uniform(1.0, 2.5, n)
    ch1 = ch1 + spikes * kick
    ch2 = ch2 + spikes * kick
    return SignalRecord(record_id, profile.class_id, ch1, ch2, DEFAULT_SAMPLE_RATE_HZ)


def make_dataset(classes=None, records_per_class: int = RECORDS_PER_CLASS, seed: int = 0,
                 n: int = N_SAMPLES, **kwargs) -> Dataset:
    classes = list(range(1, N_CLASSES + 1)) if classes is None else list(classes)
    if any(c < 1 or c > N_CLASSES for c in classes):
        raise ConfigError(f"synthetic classes must lie in 1..{N_CLASSES}")
    if records_per_class < 1:
        raise ConfigError("records_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    records = []
    for c in classes:
        prof = class_profile(c)
        for r in range(records_per_class):
            records.append(synth_record(prof, f"c{c:02d}_r{r:02d}", rng, n, **kwargs))
    names = {c: f"synthetic_defect_{c}" for c in classes}
    return Dataset(tuple(records), names)


def make_set(which: int, seed: int = 0, **kwargs) -> Dataset:
    """Set 1: classes 1 and 2 only. Set 2: all twelve classes."""
    if which == 1:
        return make_dataset([1, 2], seed=seed, **kwargs)
    if which == 2:
        return make_dataset(None, seed=seed, **kwargs)
    raise ConfigError(f"unknown synthetic set {which} (expected 1 or 2)")
