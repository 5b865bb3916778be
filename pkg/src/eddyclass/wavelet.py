"""Continuous, discrete and packet wavelet transforms plus coefficient statistics.

Everything is built on the Daubechies family (db5 by default) with filters
derived by spectral factorization, periodic extension for the DWT/PWT
pyramids and a cascade-synthesized mother wavelet for the CWT.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt

import numpy as np
from scipy.signal import fftconvolve

from .dataset import SignalRecord
from .errors import ConfigError, DataError

CWT_SCALES = 100
DWT_LEVELS = 12
PWT_LEVELS = 4
METHODS = ("cwt-mavsap", "cwt-full", "dwt", "pwt")


def daubechies_lowpass(order: int) -> np.ndarray:
    """Extremal-phase Daubechies scaling filter with ``2 * order`` taps, summing to sqrt(2).

    Roots of the Daubechies polynomial P(y) are mapped back to the z-plane
    and the ones inside the unit circle are kept (minimum phase).
    """
    if order < 1:
        raise ConfigError(f"Daubechies order must be >= 1, got {order}")
    poly = np.array([1.0 + 0j])
    for _ in range(order):
        poly = np.convolve(poly, [1.0, 1.0])
    if order > 1:
        p_coeffs = [comb(order - 1 + k, k) for k in range(order)]
        for y in np.roots(p_coeffs[::-1]):
            z = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            poly = np.convolve(poly, [1.0, -z[np.argmin(np.abs(z))]])
    h = np.real(poly)
    return h * (sqrt(2.0) / h.sum())


def quadrature_mirror(lowpass: np.ndarray) -> np.ndarray:
    taps = len(lowpass)
    return np.array([(-1) ** k * lowpass[taps - 1 - k] for k in range(taps)])


@dataclass(frozen=True)
class WaveletSpec:
    family_name: str
    lowpass: tuple[float, ...]
    highpass: tuple[float, ...]
    cascade_resolution: int = 10

    @classmethod
    def from_name(cls, name: str = "db5", cascade_resolution: int = 10) -> "WaveletSpec":
        if not name.startswith("db") or not name[2:].isdigit():
            raise ConfigError(f"unsupported wavelet family {name!r} (only dbN is available)")
        h = daubechies_lowpass(int(name[2:]))
        return cls(name, tuple(h), tuple(quadrature_mirror(h)), cascade_resolution)

    @property
    def length(self) -> int:
        return len(self.lowpass)


DB5 = WaveletSpec.from_name("db5")


@dataclass(frozen=True, eq=False)
class CwtMatrix:
    coefficients: np.ndarray  # (scales, samples)

    @property
    def scale_count(self) -> int:
        return self.coefficients.shape[0]

    @property
    def sample_count(self) -> int:
        return self.coefficients.shape[1]


@dataclass(frozen=True, eq=False)
class CoeffBank:
    """Ordered, named coefficient sequences from a DWT or PWT."""

    names: tuple[str, ...]
    sequences: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.sequences[self.names.index(name)]

    def energy(self) -> float:
        return float(sum(np.sum(np.abs(s) ** 2) for s in self.sequences))


@dataclass(frozen=True)
class CoeffStats:
    mav: float
    variance: float
    max_abs: float
    min_abs: float
    energy: float
    entropy: float


# --------------------------------------------------------------------------
# Mother wavelet synthesis
# --------------------------------------------------------------------------

@lru_cache(maxsize=8)
def cascade(spec: WaveletSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tabulate (x, phi, psi) on a grid of step 2**-J over the support [0, L-1]."""
    h = np.array(spec.lowpass)
    g = np.array(spec.highpass)
    J = spec.cascade_resolution
    phi = np.array([1.0])
    for j in range(J):
        up = np.zeros((len(h) - 1) * 2**j + 1)
        up[:: 2**j] = h
        phi = sqrt(2.0) * np.convolve(phi, up)
    step = 2**J
    n_grid = (len(h) - 1) * step + 1
    psi = np.zeros(n_grid)
    idx = 2 * np.arange(n_grid)
    for k, gk in enumerate(g):
        j = idx - k * step
        ok = (j >= 0) & (j < len(phi))
        psi[ok] += sqrt(2.0) * gk * phi[j[ok]]
    x = np.arange(n_grid) / step
    phi_full = np.zeros(n_grid)
    phi_full[: len(phi)] = phi
    for a in (x, phi_full, psi):
        a.setflags(write=False)
    return x, phi_full, psi


def psi(spec: WaveletSpec, t) -> np.ndarray:
    """Mother wavelet evaluated by linear interpolation of the cascade table, zero off-support."""
    x, _, table = cascade(spec)
    return np.interp(t, x, table, left=0.0, right=0.0)


@lru_cache(maxsize=512)
def _cwt_kernel(spec: WaveletSpec, scale: int) -> np.ndarray:
    m = np.arange(int(np.floor((spec.length - 1) * scale)) + 1)
    k = psi(spec, m / scale) / sqrt(scale)
    k.setflags(write=False)
    return k


# --------------------------------------------------------------------------
# Transforms
# --------------------------------------------------------------------------

def cwt(samples, scales=CWT_SCALES, spec: WaveletSpec = DB5) -> CwtMatrix:
    """C[a, b] = sum_t f(t) psi((t - b) / a) / sqrt(a), zero outside the signal.

    ``scales`` is either a count M (meaning 1..M) or an explicit sequence.
    """
    f = np.asarray(samples)
    if f.ndim != 1 or len(f) == 0:
        raise DataError("cwt needs a non-empty one-dimensional signal")
    if not np.all(np.isfinite(f)):
        raise DataError("cwt input contains non-finite values")
    scale_list = list(range(1, int(scales) + 1)) if np.isscalar(scales) else [int(s) for s in scales]
    if not scale_list or min(scale_list) < 1:
        raise ConfigError("cwt scales must be >= 1")
    n = len(f)
    dtype = complex if np.iscomplexobj(f) else float
    out = np.empty((len(scale_list), n), dtype=dtype)
    for row, a in enumerate(scale_list):
        k = _cwt_kernel(spec, a)
        full = fftconvolve(f, k[::-1], mode="full")
        out[row] = full[len(k) - 1 : len(k) - 1 + n]
    return CwtMatrix(out)


def _analysis_step(x: np.ndarray, spec: WaveletSpec) -> tuple[np.ndarray, np.ndarray]:
    n = len(x)
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(spec.length)[None, :]) % n
    windows = x[idx]
    return windows @ np.array(spec.lowpass), windows @ np.array(spec.highpass)


def _check_divisible(x: np.ndarray, levels: int) -> None:
    if levels < 1:
        raise ConfigError(f"levels must be >= 1, got {levels}")
    if len(x) == 0 or len(x) % (2**levels):
        raise DataError(f"signal length {len(x)} is not divisible by 2**{levels}")
    if not np.all(np.isfinite(x)):
        raise DataError("wavelet input contains non-finite values")


def dwt(samples, levels: int = DWT_LEVELS, spec: WaveletSpec = DB5) -> CoeffBank:
    """Periodized pyramid: detail_1..detail_L then approx_L."""
    x = np.asarray(samples)
    _check_divisible(x, levels)
    names, seqs = [], []
    approx = x
    for level in range(1, levels + 1):
        approx, detail = _analysis_step(approx, spec)
        names.append(f"detail_{level}")
        seqs.append(detail)
    names.append(f"approx_{levels}")
    seqs.append(approx)
    return CoeffBank(tuple(names), tuple(seqs))


def gray_code(i: int) -> int:
    return i ^ (i >> 1)


def pwt(samples, levels: int = PWT_LEVELS, spec: WaveletSpec = DB5) -> CoeffBank:
    """Full wavelet-packet tree; terminal nodes returned in frequency order.

    Natural tree order puts the low-pass child first at every split, which
    inverts frequency order below each high-pass branch.  Frequency position
    ``f`` therefore holds natural node ``gray_code(f)``.
    """
    x = np.asarray(samples)
    _check_divisible(x, levels)
    nodes = [x]
    for _ in range(levels):
        nxt = []
        for node in nodes:
            lo, hi = _analysis_step(node, spec)
            nxt += [lo, hi]
        nodes = nxt
    ordered = tuple(nodes[gray_code(f)] for f in range(len(nodes)))
    names = tuple(f"node_{f}" for f in range(len(nodes)))
    return CoeffBank(names, ordered)


# --------------------------------------------------------------------------
# Statistics and feature assembly
# --------------------------------------------------------------------------

def coeff_stats(coeffs) -> CoeffStats:
    c = np.asarray(coeffs)
    if c.size == 0:
        raise DataError("coeff_stats needs at least one coefficient")
    mag = np.abs(c)
    power = mag**2
    nz = power > 0
    entropy = -float(np.sum(power[nz] * np.log(power[nz])))
    return CoeffStats(
        mav=float(mag.mean()),
        variance=float(np.var(c)),
        max_abs=float(mag.max()),
        min_abs=float(mag.min()),
        energy=float(power.sum()),
        entropy=entropy,
    )


def sap(matrix: CwtMatrix) -> np.ndarray:
    """Scale-averaged wavelet power: mean over scales of |C[a, b]|^2."""
    return np.mean(np.abs(matrix.coefficients) ** 2, axis=0)


def wavelet_features(record: SignalRecord, method: str, channel_mode: str = "ch1",
                     spec: WaveletSpec = DB5) -> np.ndarray:
    x = record.channel(channel_mode)
    if method == "cwt-mavsap":
        m = cwt(x, CWT_SCALES, spec)
        mav = np.mean(np.abs(m.coefficients), axis=1)
        return np.concatenate([sap(m), mav])
    if method == "cwt-full":
        coeffs = cwt(x, CWT_SCALES, spec).coefficients
        # complex input: keep real-valued features by taking moduli
        return (np.abs(coeffs) if np.iscomplexobj(coeffs) else coeffs).ravel()
    if method == "dwt":
        bank = dwt(x, DWT_LEVELS, spec)
        order = [f"approx_{DWT_LEVELS}"] + [f"detail_{l}" for l in range(DWT_LEVELS, 0, -1)]
        out = []
        for name in order:
            s = coeff_stats(bank[name])
            out += [s.mav, s.variance]
        return np.array(out)
    if method == "pwt":
        bank = pwt(x, PWT_LEVELS, spec)
        out = []
        for seq in bank.sequences:
            s = coeff_stats(seq)
            out += [s.mav, s.variance, s.entropy]
        return np.array(out)
    raise ConfigError(f"unknown wavelet method {method!r}")
