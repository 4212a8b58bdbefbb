from __future__ import annotations

import numpy as np
import pytest
from scipy import special

from parabolic.estimators import ball_mass, ball_masses, blowup, closed_form_ball_mass, density_curve
from parabolic.exceptions import EmptyMeasureError, InvalidArgumentError
from parabolic.geometry import Metric, Point, VerticalHyperplane
from parabolic.holder import weierstrass_profile
from parabolic.models import FlatPlane, HolderGraph, QuadricGraph, VerticalLine, flat_normalization
from parabolic.particles import ParticleMeasure, WindowProposal, sample
from parabolic.utils import sphere_area


@pytest.mark.parametrize("n", [2, 3, 5])
def test_flat_normalization_matches_gaussian_integral(n: int) -> None:
    h = n + 1
    expected = 4.0 * special.gamma(h / 4 + 1) / (sphere_area(n - 2) * special.gamma((n - 1) / 4) * np.sqrt(np.pi))
    assert flat_normalization(n) == pytest.approx(expected, rel=1e-10)
    assert flat_normalization(1) == 0.5


@pytest.mark.parametrize("n", [1, 2, 3])
def test_flat_closed_form_is_uniform(n: int) -> None:
    model = FlatPlane(VerticalHyperplane(np.eye(n)[0]))
    x = Point(np.append(0.0, np.full(n - 1, 0.3)), -1.2)
    for r in (0.1, 1.0, 7.0):
        assert closed_form_ball_mass(model, x, r, Metric.KORANYI) == pytest.approx(r ** (n + 1), rel=1e-12)


def test_vertical_line_closed_forms() -> None:
    model = VerticalLine(Point([0.0], 0.0))
    assert closed_form_ball_mass(model, Point([0.0], 3.0), 0.7, Metric.KORANYI) == pytest.approx(0.49)
    assert closed_form_ball_mass(model, Point([0.5], 0.0), 1.0, Metric.KORANYI) == pytest.approx(np.sqrt(1 - 0.0625))
    assert closed_form_ball_mass(model, Point([2.0], 0.0), 1.0, Metric.KORANYI) == 0.0
    assert closed_form_ball_mass(model, Point([0.5], 0.0), 1.0, Metric.BOX) == pytest.approx(1.0)


def test_off_plane_koranyi_mass_matches_sampling() -> None:
    model = FlatPlane(VerticalHyperplane([1.0, 0.0]))
    x = Point([0.3, 0.0], 0.0)
    r = 0.5
    exact = closed_form_ball_mass(model, x, r, Metric.KORANYI)
    assert 0.0 < exact < r**3
    cloud = sample(model, 60_000, seed=21, proposal=WindowProposal(x, r))
    assert ball_mass(cloud, x, r).within(exact, k=4.0)


def test_box_mass_matches_sampling() -> None:
    model = FlatPlane(VerticalHyperplane([1.0, 0.0]))
    x = Point([0.0, 0.2], 0.1)
    r = 0.5
    exact = closed_form_ball_mass(model, x, r, Metric.BOX)
    assert exact == pytest.approx(model.normalization * 2 * r * 2 * r**2)
    cloud = sample(model, 20_000, seed=3, proposal=WindowProposal(x, r))
    assert ball_mass(cloud, x, r, Metric.BOX).within(exact, k=4.0, atol=1e-12)


def test_exact_flag_uses_the_closed_form() -> None:
    model = FlatPlane(VerticalHyperplane([1.0, 0.0]))
    cloud = sample(model, 1000, seed=1)
    est = ball_mass(cloud, Point.origin(2), 0.5, exact=True)
    assert est.std_error == 0.0
    assert est.value == pytest.approx(0.125)

    quadric = sample(QuadricGraph(np.eye(2)), 1000, seed=1)
    assert ball_mass(quadric, Point.origin(2), 0.5, exact=True).n_samples == 1000


def test_holder_box_closed_form_needs_a_graph_point() -> None:
    profile = weierstrass_profile(4, 1, seed=2)
    model = HolderGraph(profile)
    t0 = 0.4
    on = Point([float(profile(np.array([t0]))[0])], t0)
    off = Point([on.h[0] + 0.5], t0)
    assert closed_form_ball_mass(model, on, 0.3, Metric.BOX) == pytest.approx(0.18)
    assert closed_form_ball_mass(model, off, 0.3, Metric.BOX) is None
    assert closed_form_ball_mass(model, on, 0.3, Metric.KORANYI) is None


def test_blowup_rescales_exactly() -> None:
    model = QuadricGraph(np.diag([1.0, -0.5]))
    mu = sample(model, 5000, seed=4)
    x = Point.from_coords(mu.coords[0])
    r = 0.5
    blown = blowup(mu, x, r, h=3)
    assert blown.model is None
    lhs = ball_mass(blown, Point.origin(2), 1.0).value
    rhs = ball_mass(mu, x, r).value * r**-3
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_density_curve_and_batch_masses() -> None:
    model = FlatPlane(VerticalHyperplane([1.0, 0.0]))
    x = Point.origin(2)
    cloud = sample(model, 40_000, seed=6, proposal=WindowProposal(x, 1.0))
    radii = [0.25, 0.5, 1.0]
    for est in density_curve(cloud, x, radii, 3):
        assert est.within(1.0, k=4.0)
    masses = ball_masses(cloud, x, radii)
    assert [m.value for m in masses] == sorted(m.value for m in masses)
    with pytest.raises(InvalidArgumentError):
        density_curve(cloud, x, [1.0, 0.5], 3)


def test_argument_errors() -> None:
    cloud = sample(VerticalLine(Point([0.0], 0.0)), 100, seed=0)
    with pytest.raises(InvalidArgumentError):
        ball_mass(cloud, Point.origin(1), 0.0)
    empty = ParticleMeasure(np.zeros((0, 2)), np.zeros(0), np.zeros(0), (0,))
    with pytest.raises(EmptyMeasureError):
        ball_mass(empty, Point.origin(1), 1.0)
