from __future__ import annotations

import numpy as np
import pytest

from parabolic.exceptions import DimensionMismatchError, InvalidArgumentError
from parabolic.geometry import (
    HomSubgroup,
    Metric,
    Point,
    VerticalHyperplane,
    dilate,
    dilate_coords,
    distance,
    distances,
    plane_distance,
    stratification,
)


def _random_points(count: int, n: int, seed: int) -> list[Point]:
    rng = np.random.default_rng(seed)
    return [Point(rng.normal(size=n), float(rng.normal())) for _ in range(count)]


def test_known_distances() -> None:
    origin = Point.origin(2)
    assert distance(Point([1.0, 0.0], 0.0), origin) == pytest.approx(1.0)
    assert distance(Point([0.0, 0.0], 4.0), origin) == pytest.approx(2.0)
    assert distance(Point([0.0, 0.0], 4.0), origin, Metric.BOX) == pytest.approx(2.0)
    assert distance(Point([3.0, 4.0], 4.0), origin, Metric.BOX) == pytest.approx(5.0)
    assert distance(Point([1.0, 1.0], 2.0), origin) == pytest.approx(8.0**0.25)


@pytest.mark.parametrize("metric", [Metric.KORANYI, Metric.BOX])
def test_distance_is_homogeneous_under_dilation(metric: Metric) -> None:
    x, y = _random_points(2, 3, seed=1)
    for lam in (0.1, 0.5, 3.0):
        assert distance(dilate(x, lam), dilate(y, lam), metric) == pytest.approx(lam * distance(x, y, metric), rel=1e-12)


def test_koranyi_triangle_inequality() -> None:
    pts = _random_points(12, 2, seed=7)
    for a in pts:
        for b in pts:
            for c in pts:
                assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12


def test_metrics_are_comparable() -> None:
    origin = Point.origin(3)
    for p in _random_points(50, 3, seed=2):
        box = distance(p, origin, Metric.BOX)
        kor = distance(p, origin)
        assert box <= kor * (1 + 1e-12)
        assert kor <= 2.0**0.25 * box * (1 + 1e-12)


def test_translation_invariance() -> None:
    x, y, z = _random_points(3, 2, seed=4)
    assert distance(x + z, y + z) == pytest.approx(distance(x, y), rel=1e-12)
    assert distance(x - y, Point.origin(2)) == pytest.approx(distance(x, y), rel=1e-12)


def test_vectorized_distances_match_scalar() -> None:
    pts = _random_points(10, 2, seed=5)
    coords = np.array([p.coords for p in pts])
    x = pts[0]
    expected = [distance(p, x) for p in pts]
    np.testing.assert_allclose(distances(coords, x), expected, rtol=1e-13)


def test_dilate_coords_matches_points() -> None:
    pts = _random_points(4, 2, seed=6)
    coords = np.array([p.coords for p in pts])
    scaled = dilate_coords(coords, 2.5)
    for row, p in zip(scaled, pts):
        np.testing.assert_allclose(row, dilate(p, 2.5).coords)


def test_point_validation() -> None:
    with pytest.raises(InvalidArgumentError):
        Point([np.nan], 0.0)
    with pytest.raises(InvalidArgumentError):
        Point([0.0], np.inf)
    with pytest.raises(InvalidArgumentError):
        dilate(Point([1.0], 0.0), 0.0)
    with pytest.raises(DimensionMismatchError):
        distance(Point([1.0], 0.0), Point([1.0, 0.0], 0.0))


def test_point_equality_and_hash() -> None:
    a = Point([1.0, 2.0], 3.0)
    b = Point.from_coords([1.0, 2.0, 3.0])
    assert a == b
    assert hash(a) == hash(b)
    assert a.to_dict() == {"h": [1.0, 2.0], "t": 3.0}


def test_vertical_hyperplane() -> None:
    plane = VerticalHyperplane([0.6, 0.8], 1.0)
    x = Point([3.0, 4.0], 17.0)
    assert plane_distance(x, plane) == pytest.approx(4.0)
    assert plane_distance(x, plane, Metric.BOX) == pytest.approx(4.0)
    assert not plane.contains(x)
    assert VerticalHyperplane.through(x, [0.6, 0.8]).contains(x)
    basis = plane.basis()
    np.testing.assert_allclose(basis.T @ plane.unit_normal, 0.0, atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        VerticalHyperplane([1.0, 1.0])


def test_homogeneous_subgroups() -> None:
    assert HomSubgroup.vertical_line(3).homogeneous_dimension == 2
    plane = VerticalHyperplane([0.0, 0.0, 1.0])
    subgroup = HomSubgroup.from_hyperplane(plane)
    assert subgroup.homogeneous_dimension == 4
    assert stratification(subgroup) == (2, 1)
    assert stratification(HomSubgroup.horizontal(2)) == (2, 0)
    with pytest.raises(InvalidArgumentError):
        HomSubgroup(2, np.array([[1.0, 1.0]]))
