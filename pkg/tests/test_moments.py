from __future__ import annotations

import numpy as np
import pytest

from parabolic.exceptions import DimensionMismatchError, InvalidArgumentError
from parabolic.geometry import Point, VerticalHyperplane
from parabolic.models import FlatPlane, KPConeProduct, QuadricGraph, VerticalLine
from parabolic.moments import (
    c_alpha,
    degeneracy_probe,
    expansion_envelope,
    expansion_residual,
    fit_expansion_constant,
    flatness_functional,
    gaussian_radial_integral,
    log_slope,
    moment,
    moment_curves,
    moment_report,
    multi_indices,
    polarization,
    polarization_arrays,
    polarization_bounds,
    quartic_defect,
    radial_closed_form,
    splitter_defect,
)
from parabolic.particles import QuadratureRule, sample


def _flat_lattice(n: int = 2, N: int = 160_000):
    model = FlatPlane(VerticalHyperplane(np.eye(n)[0]))
    return sample(model, N, seed=0, proposal=QuadratureRule())


def test_polarization_splits_2v() -> None:
    rng = np.random.default_rng(1)
    u = rng.normal(size=(50, 4))
    z = rng.normal(size=(50, 4))
    V, L, Q, T = polarization_arrays(u, z)
    np.testing.assert_allclose(2.0 * V, L + Q + T, rtol=1e-10, atol=1e-10)


def test_polarization_bounds_hold() -> None:
    rng = np.random.default_rng(2)
    u = rng.normal(size=(200, 3)) * rng.uniform(0.1, 3.0, size=(200, 1))
    z = rng.normal(size=(200, 3))
    parts = polarization_arrays(u, z)
    for value, bound in zip(parts, polarization_bounds(u, z)):
        assert np.all(np.abs(value) <= bound * (1 + 1e-12) + 1e-12)


def test_polarization_of_points() -> None:
    parts = polarization(Point([1.0], 0.0), Point([1.0], 0.0))
    assert parts.V == pytest.approx(1.0)
    with pytest.raises(DimensionMismatchError):
        polarization(Point([1.0], 0.0), Point([1.0, 0.0], 0.0))


def test_multi_indices() -> None:
    assert sorted(multi_indices(1)) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert len(multi_indices(3)) == 10
    assert all(sum(a) == 3 for a in multi_indices(3))


def test_zeroth_moment_and_bad_arguments() -> None:
    mu = sample(QuadricGraph(np.eye(2)), 500, seed=1)
    u = Point([0.1, 0.2], 0.05)
    assert moment(mu, 0, 1.0, u).value == 1.0
    with pytest.raises(InvalidArgumentError):
        moment(mu, -1, 1.0, u)
    with pytest.raises(InvalidArgumentError):
        moment(mu, 1, 0.0, u)
    with pytest.raises(InvalidArgumentError):
        c_alpha(mu, (0, 0, 0), 1.0, u)
    with pytest.raises(InvalidArgumentError):
        moment(mu.transformed(mu.coords, 1.0), 1, 1.0, u)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_splitter_defect_vanishes_for_any_cloud(k: int) -> None:
    mu = sample(QuadricGraph(np.diag([1.0, -2.0])), 4000, seed=k)
    u = Point([0.3, -0.2], 0.1)
    defect = splitter_defect(mu, k, 0.7, u)
    scale = sum(abs(c_alpha(mu, a, 0.7, u).value) for a in multi_indices(k)) + 1.0
    assert abs(defect.value) <= 1e-10 * scale


@pytest.mark.parametrize("p", [0.0, 2.0])
def test_radial_integral_on_a_flat_lattice(p: float) -> None:
    mu = _flat_lattice()
    for s in (0.5, 1.0, 2.0):
        value = gaussian_radial_integral(mu, Point.origin(2), s, p).value
        assert value == pytest.approx(radial_closed_form(3, s, p), rel=1e-3)


def test_odd_curves_vanish_on_a_symmetric_lattice() -> None:
    mu = _flat_lattice()
    curves = moment_curves(mu, 1.0)
    assert np.abs(curves.b).max() < 1e-10
    assert abs(curves.T) < 1e-10


def test_quartic_defect_vertical_line() -> None:
    mu = sample(VerticalLine(Point([0.0], 0.0)), 20_000, seed=0, proposal=QuadratureRule())
    on_support = quartic_defect(mu, Point([0.0], 0.7))
    assert abs(on_support.value) < 1e-6
    off_support = quartic_defect(mu, Point([0.5], 0.7))
    assert off_support.value == pytest.approx(-0.0625, rel=1e-4)


def test_quartic_defect_flat_plane_on_support() -> None:
    mu = _flat_lattice()
    for u in (Point([0.0, 0.5], 0.1), Point([0.0, -0.8], -0.3)):
        assert abs(quartic_defect(mu, u).value) < 5e-3 * (0.8**4 + 0.3**2)


def test_flatness_functional() -> None:
    assert flatness_functional(_flat_lattice(N=10_000)).value <= 1e-12
    curved = sample(QuadricGraph(np.eye(2)), 20_000, seed=3)
    assert flatness_functional(curved).value > 0.0


def test_moment_report_contents() -> None:
    mu = _flat_lattice(N=10_000)
    report = moment_report(mu, 1.0, Point([0.0, 0.3], 0.1), k_max=2)
    assert set(report.b) == {0, 1, 2}
    assert len(report.c) == 3 + 6
    data = report.to_dict()
    assert {"b", "c", "curves", "F", "quartic_defect"} <= set(data)
    assert "110" in data["c"]


def test_expansion_helpers() -> None:
    u = Point([1.0], 0.0)
    assert expansion_envelope(1.0, u, 1) == pytest.approx(3.0)
    assert log_slope([1.0, 2.0, 4.0], [3.0, 12.0, 48.0]) == pytest.approx(2.0)
    mu = sample(QuadricGraph(np.eye(2)), 2000, seed=5)
    norms = degeneracy_probe(mu, [2.0, 1.0, 0.5])
    assert len(norms) == 3 and all(v >= 0 for v in norms)
    with pytest.raises(InvalidArgumentError):
        degeneracy_probe(mu, [0.5, 1.0])


def test_curves_reassemble_the_second_order_moments() -> None:
    mu = sample(QuadricGraph(np.diag([1.0, -2.0])), 4000, seed=3)
    u = Point([0.3, -0.2], 0.4)
    s = 0.6
    pieces = [c_alpha(mu, a, s, u).value for a in [(1, 0, 0), (2, 0, 0), (0, 1, 0)]]
    curves = moment_curves(mu, s)
    assembled = np.sqrt(s) * float(curves.b @ u.h + u.h @ curves.Q @ u.h + curves.T * u.t)
    assert curves.T != 0.0
    assert abs(assembled - sum(pieces)) <= 1e-10 * (sum(abs(p) for p in pieces) + 1.0)


def test_quartic_defect_on_the_kp_cone() -> None:
    mu = sample(KPConeProduct(4), 200_000, seed=11)
    defect = quartic_defect(mu, Point([0.6, 0.0, 0.0, 0.6], 0.3))
    assert defect.std_error > 0.0
    assert defect.within(0.0, k=3.0)


@pytest.mark.parametrize("seed", range(5))
def test_kp_cone_is_not_flat(seed: int) -> None:
    F = flatness_functional(sample(KPConeProduct(4), 50_000, seed=seed))
    assert F.value > 5.0 * F.std_error


def test_vertical_lines_are_flat() -> None:
    for base in (Point([0.0], 0.0), Point([0.3, -0.4], 0.0)):
        F = flatness_functional(sample(VerticalLine(base), 5000, seed=2))
        assert F.within(0.0, k=3.0, atol=1e-12)


def test_expansion_residual_decays_faster_than_s() -> None:
    mu = sample(FlatPlane(VerticalHyperplane([1.0, 0.0])), 160_000, seed=0, proposal=QuadratureRule(scale=2.0))
    u = Point([0.0, 0.0], 0.5)
    s_values = np.geomspace(0.1, 1.0, 6)
    residuals = [expansion_residual(mu, u, s, 1).value for s in s_values]
    # along the vertical axis the moment sum is s|u|^4 + (s|u|^4)^2 / 2
    np.testing.assert_allclose(residuals, 0.5 * (s_values * 0.25) ** 2, rtol=1e-6)
    assert log_slope(s_values, residuals) >= 1.20
    G = fit_expansion_constant(residuals, s_values, u, 1)
    assert all(r <= G * expansion_envelope(s, u, 1) * (1 + 1e-12) for r, s in zip(residuals, s_values))
