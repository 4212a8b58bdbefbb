from __future__ import annotations

import numpy as np
import pytest

from parabolic.estimators import ball_mass
from parabolic.exceptions import DimensionMismatchError, InvalidArgumentError, UnsupportedModelError
from parabolic.geometry import Point, VerticalHyperplane
from parabolic.models import FlatPlane, KPConeProduct, QuadricGraph, VerticalLine
from parabolic.particles import (
    GaussianProposal,
    MassEstimate,
    ParticleMeasure,
    QuadratureRule,
    WindowProposal,
    read_csv,
    sample,
    sample_shells,
    write_csv,
)


def _plane(n: int = 2) -> FlatPlane:
    return FlatPlane(VerticalHyperplane(np.eye(n)[0]))


def test_sampling_is_deterministic() -> None:
    model = _plane()
    a = sample(model, 2000, seed=5)
    b = sample(model, 2000, seed=5)
    c = sample(model, 2000, seed=6)
    np.testing.assert_array_equal(a.coords, b.coords)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert not np.array_equal(a.coords, c.coords)


def test_atoms_lie_on_the_plane() -> None:
    model = FlatPlane(VerticalHyperplane([0.6, 0.8], 0.5))
    cloud = sample(model, 500, seed=1)
    np.testing.assert_allclose(model.plane.signed_distance(cloud.coords), 0.0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_flat_window_ball_mass_matches_uniformity(n: int) -> None:
    model = _plane(n)
    x = Point.origin(n)
    r = 0.5
    cloud = sample(model, 40_000, seed=11, proposal=WindowProposal(x, r))
    estimate = ball_mass(cloud, x, r)
    # For n = 1 every window draw lands in the ball, so the estimate is exact.
    assert estimate.within(r ** (n + 1), k=4.0, atol=1e-12)


def test_gaussian_proposal_ball_mass() -> None:
    model = _plane(2)
    cloud = sample(model, 60_000, seed=2, proposal=GaussianProposal(scale=1.0))
    assert ball_mass(cloud, Point.origin(2), 1.0).within(1.0, k=4.0)


def test_kp_cone_is_uniform_at_a_support_point() -> None:
    model = KPConeProduct(4)
    x = Point([1.0, 0.0, 0.0, 1.0], 0.0)
    r = 0.5
    cloud = sample(model, 200_000, seed=9, proposal=WindowProposal(x, r))
    estimate = ball_mass(cloud, x, r).scaled(r**-5)
    assert estimate.within(1.0, k=4.0, atol=0.01)


def test_quadrature_rule_is_deterministic_with_zero_error() -> None:
    model = _plane(2)
    cloud = sample(model, 90_000, seed=0, proposal=QuadratureRule(scale=0.5))
    assert cloud.counts == (0,)
    estimate = ball_mass(cloud, Point.origin(2), 1.0)
    assert estimate.std_error == 0.0
    assert estimate.value == pytest.approx(1.0, rel=0.02)


def test_quadrature_rule_node_counts() -> None:
    model = VerticalLine(Point([0.0], 0.0))
    cloud = sample(model, 10, seed=0, proposal=QuadratureRule(nodes=(400,)))
    assert cloud.size == 400
    with pytest.raises(InvalidArgumentError):
        sample(model, 10, seed=0, proposal=QuadratureRule(nodes=(4, 4)))


def test_quadric_graph_has_no_lattice() -> None:
    with pytest.raises(UnsupportedModelError):
        sample(QuadricGraph(np.eye(2)), 100, seed=0, proposal=QuadratureRule())


def test_sample_rejects_bad_arguments() -> None:
    with pytest.raises(InvalidArgumentError):
        sample(_plane(), 0, seed=0)
    with pytest.raises(DimensionMismatchError):
        sample(_plane(2), 10, seed=0, proposal=WindowProposal(Point.origin(3), 1.0))


def test_quadric_atoms_lie_on_the_graph() -> None:
    model = QuadricGraph(np.diag([1.0, -1.0]), np.array([0.5, 0.0]))
    cloud = sample(model, 300, seed=4)
    y = cloud.coords[:, :-1]
    np.testing.assert_allclose(cloud.coords[:, -1], model.height(y), rtol=1e-12, atol=1e-12)


def test_shells_cover_the_ball() -> None:
    model = _plane(2)
    x = Point.origin(2)
    cloud = sample_shells(model, x, 0.125, 1.0, 20_000, seed=3)
    assert len(cloud.counts) == 4
    assert cloud.model is model
    estimate = ball_mass(cloud, x, 1.0)
    assert estimate.within(1.0, k=4.0)
    inner = ball_mass(cloud, x, 0.25)
    assert inner.within(0.25**3, k=4.0)


def test_restrict_and_union() -> None:
    cloud = sample(_plane(2), 1000, seed=8)
    left = cloud.restrict(cloud.coords[:, -1] < 0)
    right = cloud.restrict(cloud.coords[:, -1] >= 0)
    both = left.union(right)
    assert both.size == cloud.size
    assert both.total_mass().value == pytest.approx(cloud.total_mass().value, rel=1e-12)
    assert both.counts == (1000, 1000)


def test_mass_estimate_helpers() -> None:
    est = MassEstimate(2.0, 0.1, 100)
    assert est.within(2.25, k=3.0)
    assert not est.within(2.5, k=3.0)
    assert est.scaled(-2.0) == MassEstimate(-4.0, 0.2, 100)


def test_measure_validation() -> None:
    with pytest.raises(InvalidArgumentError):
        ParticleMeasure(np.zeros((2, 3)), np.array([1.0, -1.0]), np.zeros(2), (2,))
    with pytest.raises(InvalidArgumentError):
        ParticleMeasure(np.zeros((2, 3)), np.ones(3), np.zeros(2), (2,))


def test_csv_round_trip(tmp_path) -> None:
    cloud = sample(_plane(2), 50, seed=1)
    path = tmp_path / "cloud.csv"
    write_csv(cloud, path)
    assert path.read_text().splitlines()[0] == "n,2"
    loaded = read_csv(path)
    np.testing.assert_array_equal(loaded.coords, cloud.coords)
    np.testing.assert_array_equal(loaded.weights, cloud.weights)


def test_csv_header_is_checked(tmp_path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("dim,2\n0,0,0,1\n")
    with pytest.raises(InvalidArgumentError):
        read_csv(path)
