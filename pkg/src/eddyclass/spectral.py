"""DFT magnitudes and the 25-band, 4-bit-per-band FFT feature coding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SignalRecord
from .errors import ConfigError, DataError

N_BANDS = 25
BITS_PER_BAND = 4
N_LEVELS = 1 << BITS_PER_BAND


@dataclass(frozen=True, eq=False)
class Spectrum:
    magnitudes: np.ndarray
    n: int

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float)
        if len(mags) != self.n:
            raise DataError(f"spectrum length {len(mags)} != n={self.n}")
        if np.any(mags < 0) or not np.all(np.isfinite(mags)):
            raise DataError("spectrum magnitudes must be finite and non-negative")
        object.__setattr__(self, "magnitudes", mags)

    def nonnegative_bins(self) -> np.ndarray:
        """Magnitudes at bins 0..n/2 inclusive."""
        return self.magnitudes[: self.n // 2 + 1]


@dataclass(frozen=True, eq=False)
class BandStats:
    minimum: np.ndarray
    maximum: np.ndarray
    average: np.ndarray
    median: np.ndarray
    edges: tuple[tuple[int, int], ...]

    @property
    def bands(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class BitFeatureVector:
    bits: np.ndarray
    band_levels: np.ndarray

    def as_int_array(self) -> np.ndarray:
        return self.bits.astype(np.int8)


def dft(samples) -> Spectrum:
    """Magnitude of the N-point DFT, via numpy's FFT."""
    x = np.asarray(samples)
    if x.ndim != 1:
        raise DataError("dft expects a one-dimensional signal")
    n = len(x)
    if n < 2 or n & (n - 1):
        raise DataError(f"dft length must be a power of two >= 2, got {n}")
    if not np.all(np.isfinite(x)):
        raise DataError("dft input contains non-finite values")
    return Spectrum(np.abs(np.fft.fft(x)), n)


def band_edges(n_bins: int, bands: int) -> tuple[tuple[int, int], ...]:
    """Contiguous equal-width [start, stop) index ranges; the last band takes the remainder."""
    if bands < 1:
        raise ConfigError(f"bands must be >= 1, got {bands}")
    if bands > n_bins:
        raise ConfigError(f"bands={bands} exceeds the {n_bins} available bins")
    width = n_bins // bands
    edges = [(b * width, (b + 1) * width) for b in range(bands - 1)]
    edges.append(((bands - 1) * width, n_bins))
    return tuple(edges)


def band_stats(spectrum: Spectrum, bands: int = N_BANDS) -> BandStats:
    mags = spectrum.nonnegative_bins()
    edges = band_edges(len(mags), bands)
    chunks = [mags[a:b] for a, b in edges]
    return BandStats(
        minimum=np.array([c.min() for c in chunks]),
        maximum=np.array([c.max() for c in chunks]),
        average=np.array([c.mean() for c in chunks]),
        median=np.array([np.median(c) for c in chunks]),
        edges=edges,
    )


def quantize_levels(stats: BandStats) -> np.ndarray:
    """Map each band's average onto 16 levels spanning median +/- d.

    ``d = max(median - min, max - median)``; a flat band (d == 0) gets the
    middle level 8.
    """
    m = stats.median
    d = np.maximum(m - stats.minimum, stats.maximum - m)
    levels = np.full(len(m), N_LEVELS // 2, dtype=int)
    live = d > 0
    lo = m[live] - d[live]
    frac = (stats.average[live] - lo) / (2.0 * d[live])
    levels[live] = np.clip(np.floor(frac * N_LEVELS), 0, N_LEVELS - 1).astype(int)
    return levels


def levels_to_bits(levels) -> np.ndarray:
    levels = np.asarray(levels, dtype=int)
    if np.any(levels < 0) or np.any(levels >= N_LEVELS):
        raise DataError("band levels must lie in [0, 16)")
    shifts = np.arange(BITS_PER_BAND - 1, -1, -1)
    return ((levels[:, None] >> shifts) & 1).astype(bool).ravel()


def bits_to_levels(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=int).reshape(-1, BITS_PER_BAND)
    weights = 1 << np.arange(BITS_PER_BAND - 1, -1, -1)
    return bits @ weights


def encode_fft_features(record: SignalRecord, channel_mode: str = "ch1",
                        bands: int = N_BANDS) -> BitFeatureVector:
    stats = band_stats(dft(record.channel(channel_mode)), bands)
    levels = quantize_levels(stats)
    return BitFeatureVector(bits=levels_to_bits(levels), band_levels=levels)
