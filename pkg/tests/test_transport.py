from __future__ import annotations

import numpy as np
import pytest

from parabolic.exceptions import EmptyMeasureError, InvalidArgumentError
from parabolic.geometry import Point, VerticalHyperplane, distances
from parabolic.models import FlatPlane, QuadricGraph, flat_normalization
from parabolic.particles import WindowProposal, sample
from parabolic.transport import fk_distance, flat_cloud, flat_distance, lp_grid


def _clouds():
    x = Point.origin(2)
    flat = sample(FlatPlane(VerticalHyperplane([1.0, 0.0])), 400, seed=1, proposal=WindowProposal(x, 1.0))
    tilted = sample(FlatPlane(VerticalHyperplane([0.8, 0.6])), 400, seed=2, proposal=WindowProposal(x, 1.0))
    curved = sample(QuadricGraph(np.diag([1.0, -1.0])), 400, seed=3, proposal=WindowProposal(x, 1.0))
    return x, flat, tilted, curved


def test_distance_to_itself_is_zero() -> None:
    x, flat, _, _ = _clouds()
    assert fk_distance(flat, flat, x, 1.0) == 0.0


def test_symmetry_and_triangle_inequality_on_a_shared_grid() -> None:
    x, a, b, c = _clouds()
    grid = lp_grid(a, b, c, center=x, radius=1.0)
    ab = fk_distance(a, b, x, 1.0, grid=grid)
    ba = fk_distance(b, a, x, 1.0, grid=grid)
    bc = fk_distance(b, c, x, 1.0, grid=grid)
    ac = fk_distance(a, c, x, 1.0, grid=grid)
    assert ab > 0
    assert ab == pytest.approx(ba, rel=1e-6)
    assert ac <= ab + bc + 1e-7


def test_scaling_a_measure_scales_the_distance() -> None:
    x, flat, _, _ = _clouds()
    inside = flat.restrict(distances(flat.coords, x) <= 1.0)
    doubled = inside.transformed(inside.coords, 2.0)
    zero = inside.transformed(inside.coords, 0.0)
    grid = lp_grid(inside, center=x, radius=1.0)
    d1 = fk_distance(inside, zero, x, 1.0, grid=grid)
    d2 = fk_distance(doubled, zero, x, 1.0, grid=grid)
    assert d2 == pytest.approx(2.0 * d1, rel=1e-6)
    assert d1 <= float(inside.weights.sum()) * 1.0 + 1e-9


def test_flat_cloud_mass() -> None:
    plane = VerticalHyperplane([1.0, 0.0])
    cloud = flat_cloud(plane, 1.0, Point.origin(2), 1.0, 4096)
    assert float(cloud.weights.sum()) == pytest.approx(1.0 / flat_normalization(2), rel=0.03)
    np.testing.assert_allclose(plane.signed_distance(cloud.coords), 0.0, atol=1e-12)


def test_flat_distance_of_a_flat_measure_is_small() -> None:
    x = Point.origin(2)
    phi = flat_cloud(VerticalHyperplane([1.0, 0.0]), flat_normalization(2), x, 1.0, 512)
    result = flat_distance(phi, x, 1.0, 3, directions=4, plane_points=512, refine_steps=2)
    assert result.value <= result.coarse_value + 1e-12
    assert result.value < 0.05
    assert abs(result.plane.unit_normal[0]) == pytest.approx(1.0, abs=1e-9)


def test_flat_distance_argument_checks() -> None:
    x, flat, _, _ = _clouds()
    with pytest.raises(InvalidArgumentError):
        flat_distance(flat, x, 1.0, 2)
    with pytest.raises(EmptyMeasureError):
        flat_distance(flat, Point([50.0, 0.0], 0.0), 1.0, 3)
    with pytest.raises(InvalidArgumentError):
        fk_distance(flat, flat, x, -1.0)
