"""Impedance-plane shape features: principal-axis signature (L, W, alpha) and hull descriptors."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import SignalRecord
from .errors import ConfigError, DataError

# relative tolerance for treating the two moment eigenvalues as equal
TIE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray  # (n, 2), time order preserved

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DataError("points must have shape (n, 2)")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ShapeSignature:
    L: float
    W: float
    alpha: float  # degrees in (-90, 90]
    centroid: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.W, self.alpha])


@dataclass(frozen=True)
class InvariantDescriptors:
    compactness: float
    elongation: float
    rectangularity: float
    eccentricity: float
    convexity: float
    hull_area: float
    hull_perimeter: float

    def as_array(self) -> np.ndarray:
        return np.array([self.compactness, self.elongation, self.rectangularity,
                         self.eccentricity, self.convexity])


DESCRIPTOR_NAMES = ("compactness", "elongation", "rectangularity", "eccentricity", "convexity")


def impedance_points(record: SignalRecord, denoise_quantile: float = 0.95) -> PointSet:
    """Locus (ch1[t], ch2[t]) with the upper-right noise corner cut away.

    A point is dropped when both coordinates exceed their empirical
    ``denoise_quantile`` quantile.  ``denoise_quantile=1`` keeps everything.
    """
    if not 0 < denoise_quantile <= 1:
        raise ConfigError(f"denoise quantile must lie in (0, 1], got {denoise_quantile}")
    pts = np.column_stack([record.channel1, record.channel2])
    if denoise_quantile < 1:
        q1 = np.quantile(pts[:, 0], denoise_quantile)
        q2 = np.quantile(pts[:, 1], denoise_quantile)
        pts = pts[~((pts[:, 0] > q1) & (pts[:, 1] > q2))]
    if len(pts) == 0:
        raise DataError(f"record {record.record_id!r}: denoising removed every point")
    return PointSet(pts)


def _moments(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = pts.mean(axis=0)
    d = pts - centroid
    return centroid, d.T @ d / len(pts)


def principal_axes(points: PointSet) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (centroid, major_axis, minor_axis, (lambda_major, lambda_minor)).

    Equal eigenvalues make the axis arbitrary; the horizontal axis is used then.
    """
    pts = points.points
    if len(pts) < 3:
        raise DataError("degenerate point set: need at least 3 points")
    centroid, cov = _moments(pts)
    vals, vecs = np.linalg.eigh(cov)
    lam_minor, lam_major = float(vals[0]), float(vals[1])
    scale = max(abs(lam_major), np.finfo(float).tiny)
    if lam_major <= 0 or lam_minor <= 1e-14 * scale:
        raise DataError("degenerate point set: zero variance or collinear points")
    if lam_major - lam_minor <= TIE_RTOL * lam_major:
        major = np.array([1.0, 0.0])
    else:
        major = vecs[:, 1]
    minor = np.array([-major[1], major[0]])
    return centroid, major, minor, np.array([lam_major, lam_minor])


def fold_angle(deg: float) -> float:
    """Fold an axis angle (defined mod 180 degrees) into (-90, 90]."""
    a = math.fmod(deg, 180.0)
    if a <= -90.0:
        a += 180.0
    elif a > 90.0:
        a -= 180.0
    return a


def shape_signature(points: PointSet) -> ShapeSignature:
    centroid, major, minor, _ = principal_axes(points)
    pts = points.points
    pm = pts @ major
    pn = pts @ minor
    L = float(pm.max() - pm.min())
    W = float(pn.max() - pn.min())
    alpha = fold_angle(math.degrees(math.atan2(major[1], major[0])))
    return ShapeSignature(L, W, alpha, (float(centroid[0]), float(centroid[1])))


def convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise hull without repeated endpoint."""
    P = sorted(set(map(tuple, np.asarray(pts, dtype=float))))
    if len(P) <= 2:
        return np.array(P)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in P:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(P):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def polygon_perimeter(poly: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(poly - np.roll(poly, -1, axis=0), axis=1)))


def invariant_descriptors(points: PointSet) -> InvariantDescriptors:
    sig = shape_signature(points)
    _, _, _, (lam_major, lam_minor) = principal_axes(points)
    hull = convex_hull(points.points)
    if len(hull) < 3:
        raise DataError("degenerate point set: hull has fewer than 3 vertices")
    A = polygon_area(hull)
    P = polygon_perimeter(hull)
    path = float(np.sum(np.linalg.norm(np.diff(points.points, axis=0), axis=1)))
    convexity = min(P / path, 1.0) if path > 0 else 1.0
    return InvariantDescriptors(
        compactness=4.0 * math.pi * A / P**2,
        elongation=sig.L / sig.W,
        rectangularity=A / (sig.L * sig.W),
        eccentricity=math.sqrt(lam_minor / lam_major),
        convexity=convexity,
        hull_area=A,
        hull_perimeter=P,
    )


def cbir_features(record: SignalRecord, denoise_quantile: float = 0.95,
                  extended: bool = False) -> np.ndarray:
    """(L, W, alpha), optionally followed by the five invariant descriptors."""
    pts = impedance_points(record, denoise_quantile)
    sig = shape_signature(pts).as_array()
    if not extended:
        return sig
    return np.concatenate([sig, invariant_descriptors(pts).as_array()])
