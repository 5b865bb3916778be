import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eddyclass import shape
from eddyclass.dataset import SignalRecord
from eddyclass.errors import DataError


def _anisotropic(seed, n=40):
    # clear major axis so the orientation is well defined
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2)) * [rng.uniform(2, 5), rng.uniform(0.2, 1)]
    return pts


def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _angle_diff(a, b):
    d = (a - b) % 180.0
    return min(d, 180.0 - d)


def test_rectangle_examples():
    rect = np.array([[0, 0], [4, 0], [0, 2], [4, 2]], float)
    s = shape.shape_signature(shape.PointSet(rect))
    assert (s.L, s.W, s.alpha) == pytest.approx((4, 2, 0))
    assert s.centroid == pytest.approx((2, 1))
    r = shape.shape_signature(shape.PointSet(rect @ _rot(math.radians(30)).T))
    assert r.L == pytest.approx(4, abs=1e-9) and r.W == pytest.approx(2, abs=1e-9)
    assert r.alpha == pytest.approx(30, abs=1e-9)


def test_circle_and_square_descriptors():
    t = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    circle = shape.PointSet(np.column_stack([np.cos(t), np.sin(t)]))
    s = shape.shape_signature(circle)
    assert s.L == pytest.approx(2, abs=1e-3) and s.W == pytest.approx(2, abs=1e-3)
    d = shape.invariant_descriptors(circle)
    assert 0.98 <= d.compactness <= 1.0
    assert d.elongation == pytest.approx(1, abs=1e-3)
    assert d.eccentricity == pytest.approx(1, abs=1e-6)
    sq = shape.invariant_descriptors(shape.PointSet(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)))
    assert sq.compactness == pytest.approx(math.pi / 4, abs=0.02)
    assert sq.rectangularity == pytest.approx(1, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), dx=st.floats(-100, 100), dy=st.floats(-100, 100),
       theta=st.floats(-math.pi, math.pi), scale=st.floats(0.1, 10))
def test_similarity_invariances(seed, dx, dy, theta, scale):
    pts = _anisotropic(seed)
    base = shape.shape_signature(shape.PointSet(pts))
    moved = shape.shape_signature(shape.PointSet(pts + [dx, dy]))
    assert moved.L == pytest.approx(base.L, abs=1e-10 * max(1, base.L))
    assert moved.W == pytest.approx(base.W, abs=1e-10 * max(1, base.L))
    assert _angle_diff(moved.alpha, base.alpha) < 1e-8
    assert np.allclose(moved.centroid, np.add(base.centroid, [dx, dy]), atol=1e-10 * max(1, abs(dx) + abs(dy)))

    rot = shape.shape_signature(shape.PointSet(pts @ _rot(theta).T))
    assert rot.L == pytest.approx(base.L, abs=1e-9 * base.L)
    assert rot.W == pytest.approx(base.W, abs=1e-9 * base.L)
    assert _angle_diff(rot.alpha, base.alpha + math.degrees(theta)) < 1e-7

    sc = shape.shape_signature(shape.PointSet(scale * pts))
    assert sc.L == pytest.approx(scale * base.L, rel=1e-8)
    assert sc.W == pytest.approx(scale * base.W, rel=1e-8)
    assert _angle_diff(sc.alpha, base.alpha) < 1e-8
    d0 = shape.invariant_descriptors(shape.PointSet(pts)).as_array()
    d1 = shape.invariant_descriptors(shape.PointSet(scale * pts @ _rot(theta).T + [dx, dy])).as_array()
    assert np.allclose(d0, d1, rtol=1e-6, atol=1e-8)


def test_invariants_in_range():
    for seed in range(50):
        ps = shape.PointSet(_anisotropic(seed))
        s = shape.shape_signature(ps)
        d = shape.invariant_descriptors(ps)
        assert -90 < s.alpha <= 90
        assert 0 < d.compactness <= 1.01
        assert 0 <= d.eccentricity <= 1
        assert 0 < d.rectangularity <= 1.01
        assert 0 < d.convexity <= 1


def test_fold_angle():
    assert shape.fold_angle(90) == 90
    assert shape.fold_angle(-90) == 90
    assert shape.fold_angle(135) == -45
    assert shape.fold_angle(-180) == 0


def test_hull_oracle():
    pts = np.random.default_rng(1).uniform(size=(200, 2))
    hull = shape.convex_hull(pts)
    # every point lies on the inner side of every hull edge (counter-clockwise)
    for i in range(len(hull)):
        a, b = hull[i], hull[(i + 1) % len(hull)]
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        assert np.all(cross >= -1e-12)


def test_denoising_removes_upper_right_outlier():
    g = np.array([[x, y] for x in range(10) for y in range(10)], float)
    g = np.vstack([g, [[100.0, 100.0]]])
    rec = SignalRecord("r", 1, np.resize(g[:, 0], 128), np.resize(g[:, 1], 128))
    pts = shape.impedance_points(rec, 0.95).points
    assert not np.any((pts[:, 0] == 100) & (pts[:, 1] == 100))
    assert len(shape.impedance_points(rec, 1.0).points) == 128


def test_degenerate_sets():
    with pytest.raises(DataError, match="degenerate"):
        shape.shape_signature(shape.PointSet(np.ones((10, 2))))
    with pytest.raises(DataError, match="degenerate"):
        shape.shape_signature(shape.PointSet(np.column_stack([np.arange(5.0), np.arange(5.0)])))
