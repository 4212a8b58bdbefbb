from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from parabolic.exceptions import IllConditionedError, InvalidArgumentError, RadiusOutOfRangeError
from parabolic.quadric import (
    QuadricFrame,
    a_lower_bound,
    area_direct,
    area_monte_carlo,
    closed_form_kernel_integral,
    density,
    density_coefficients,
    exact_radius,
    expansion_constants,
    expansion_e_quadrature,
    first_order_constant,
    fit_expansion,
    h_coefficients,
    line_graph_area,
    radius_solution,
    richardson_extrapolate,
    simplified_uniformity_form,
    two_eigenvalue_form,
    uniformity_residual,
)

SADDLE = np.diag([1.0, -1.0])
DEFAULT_RADII = [2.0 ** (-3 - j / 2) for j in range(9)]


def _saddle() -> QuadricFrame:
    return QuadricFrame(SADDLE, np.ones(2) / np.sqrt(2.0))


def test_coefficients_at_zero_angle() -> None:
    frame = _saddle()
    v = frame.perp_basis[:, 0]
    k = h_coefficients(frame, 0.0, v)
    g = float(frame.gamma(v))
    assert k.A == pytest.approx(1.0 + g * g)
    assert (k.B, k.C, k.D, k.E) == (0.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("theta", [-1.2, -0.4, 0.3, 1.1])
def test_quartic_is_the_graph_distance_in_coordinates(theta: float) -> None:
    frame = QuadricFrame(np.array([[2.0, 0.5, 0.0], [0.5, -1.0, 0.3], [0.0, 0.3, 0.7]]), [0.4, -0.2, 0.9])
    v = frame.perp_basis @ np.array([0.6, 0.8])
    k = h_coefficients(frame, theta, v)
    rho = np.array([0.05, 0.3, 1.0])
    expected = frame.G(frame.P(rho, theta, v))
    np.testing.assert_allclose(k.H(rho, frame.c), expected, rtol=1e-10)


def test_series_root_is_third_order() -> None:
    frame = _saddle()
    v = frame.perp_basis[:, 0]
    theta = 0.3
    k = h_coefficients(frame, theta, v)
    radii = np.geomspace(2e-2, 2e-3, 4)
    residual, gap = [], []
    for r in radii:
        rho = radius_solution(frame, theta, v, r)
        residual.append(abs(float(k.H(rho, frame.c)) - r**4))
        gap.append(abs(rho - exact_radius(frame, theta, v, r)))
    assert np.polyfit(np.log(radii), np.log(residual), 1)[0] >= 6.5
    assert np.polyfit(np.log(radii), np.log(gap), 1)[0] >= 3.5


def test_density_expansion() -> None:
    frame = _saddle()
    v = frame.perp_basis[:, 0]
    theta = 0.7
    a1, b2 = density_coefficients(frame, theta, v)
    rho = 1e-3
    approx = frame.c + a1 * rho + b2 / frame.c * rho**2
    assert abs(float(density(frame, rho, theta, v)) - approx) < 1e-7


def test_kernel_integrals() -> None:
    assert closed_form_kernel_integral(0, 1.0) == pytest.approx(np.pi)
    assert closed_form_kernel_integral(2, 3.0) == pytest.approx(np.pi / 8)
    assert closed_form_kernel_integral(3, 5.0) == 0.0
    with pytest.raises(InvalidArgumentError):
        closed_form_kernel_integral(2, 1.5)


@pytest.mark.parametrize(
    "k, alpha",
    [(0, 1.5), (0, 2.5), (1, 2.0), (2, 2.5), (2, 3.75), (3, 3.0), (4, 3.5), (4, 4.25), (5, 4.0), (6, 4.5)],
)
def test_kernel_integrals_match_quadrature(k: int, alpha: float) -> None:
    expected, _ = integrate.quad(
        lambda x: x**k / (1.0 + x * x) ** alpha, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    assert closed_form_kernel_integral(k, alpha) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize(
    "D, x, bracket",
    [
        (SADDLE, np.ones(2) / np.sqrt(2.0), -0.25),
        (np.diag([1.0, 0.0]), [1.0, 0.0], -0.25),
        (np.eye(3), [1.0, 0.0, 0.0], -0.25),
        (np.eye(2), [1.0, 0.0], -0.125),
    ],
)
def test_uniformity_brackets(D, x, bracket: float) -> None:
    frame = QuadricFrame(D, x)
    assert expansion_constants(frame).bracket == pytest.approx(bracket, abs=1e-12)
    assert uniformity_residual(D, x) == pytest.approx(bracket, abs=1e-12)


def test_expansion_constants() -> None:
    assert first_order_constant(2) == pytest.approx(3.4961, abs=1e-4)
    assert first_order_constant(1) == 2.0
    saddle = expansion_constants(_saddle())
    assert saddle.C_n == pytest.approx(1.917024, abs=1e-5)
    assert saddle.e == pytest.approx(-0.23963, abs=1e-5)
    assert expansion_constants(QuadricFrame(np.eye(2), [1.0, 0.0])).e == pytest.approx(-0.11981, abs=1e-5)


def test_critical_distances() -> None:
    assert _saddle().critical_distance == pytest.approx(1.0)
    assert QuadricFrame(np.diag([1.0, 0.0]), [1.0, 1.0]).critical_distance == pytest.approx(2.0**0.25)


def test_fit_recovers_an_exact_cubic() -> None:
    radii = np.array(DEFAULT_RADII)
    areas = radii**3 * (3.5 + 0.2 * radii - 0.24 * radii**2)
    fit = fit_expansion(list(zip(radii, areas)), 2)
    assert fit.c_hat == pytest.approx(3.5, rel=1e-9)
    assert fit.zeta_hat == pytest.approx(0.2, rel=1e-6)
    assert fit.e_hat == pytest.approx(-0.24, rel=1e-6)
    assert max(fit.std_errors) < 1e-6


def test_fit_rejects_poor_designs() -> None:
    with pytest.raises(IllConditionedError):
        fit_expansion([(r, r**3) for r in DEFAULT_RADII[:4]], 2)
    narrow = np.linspace(0.1, 0.3, 5)
    with pytest.raises(IllConditionedError):
        fit_expansion([(r, r**3) for r in narrow], 2)


@pytest.mark.parametrize(
    "D, x",
    [
        (SADDLE, np.ones(2) / np.sqrt(2.0)),
        (np.eye(2), [1.0, 0.0]),
    ],
)
def test_direct_area_matches_the_expansion(D, x) -> None:
    frame = QuadricFrame(D, x)
    constants = expansion_constants(frame)
    areas = [area_direct(frame, r) for r in DEFAULT_RADII]
    fit = fit_expansion(list(zip(DEFAULT_RADII, areas)), 2, extra_orders=(4,))
    assert fit.c_hat == pytest.approx(constants.c_n, rel=0.01)
    assert fit.e_hat == pytest.approx(constants.e, rel=0.02)
    assert abs(fit.zeta_hat) <= 3.0 * fit.std_errors[1]


def test_e_by_quadrature_matches_the_formula() -> None:
    frame = _saddle()
    assert expansion_e_quadrature(frame) == pytest.approx(expansion_constants(frame).e, rel=1e-2)


def test_richardson_removes_even_errors() -> None:
    hs = [0.1, 0.05, 0.025]
    values = [1.0 + 0.3 * h**2 + 0.1 * h**4 for h in hs]
    levels = richardson_extrapolate(values, 2.0, [2, 4])
    assert len(levels) == 3
    assert levels[-1] == pytest.approx(1.0, abs=1e-12)


def test_area_is_dilation_covariant() -> None:
    x = np.ones(2) / np.sqrt(2.0)
    small = area_direct(QuadricFrame(SADDLE, x), 0.1)
    large = area_direct(QuadricFrame(SADDLE, 2.0 * x), 0.2)
    assert large == pytest.approx(2.0**3 * small, rel=1e-10)


def test_monte_carlo_area_agrees_with_quadrature() -> None:
    frame = _saddle()
    estimate = area_monte_carlo(frame, 0.3, 200_000, seed=1)
    assert estimate.within(area_direct(frame, 0.3), k=4.0)


def test_two_eigenvalue_identity() -> None:
    rng = np.random.default_rng(12)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    D = Q @ np.diag([1.5, 1.5, -0.7]) @ Q.T
    p = Q[:, :2] @ np.array([0.3, 0.4]) + 0.5 * Q[:, 2]
    assert simplified_uniformity_form(D, p) == pytest.approx(two_eigenvalue_form(1.5, -0.7, 0.25, 0.25), rel=1e-9)
    with pytest.raises(InvalidArgumentError):
        simplified_uniformity_form(np.diag([1.0, 2.0, 3.0]), p)


def test_line_graph_area_is_asymptotically_uniform() -> None:
    assert line_graph_area(1.5, 1e-3) / 1e-6 == pytest.approx(2.0, rel=1e-5)
    assert line_graph_area(1.5, 1.0) < 2.0


def test_frame_guards() -> None:
    frame = _saddle()
    assert a_lower_bound(frame) > 0.0
    with pytest.raises(RadiusOutOfRangeError):
        area_direct(frame, 1.0)
    with pytest.raises(InvalidArgumentError):
        QuadricFrame(np.diag([1.0, 0.0]), [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        QuadricFrame(np.array([[1.0]]), [1.0])
    with pytest.raises(InvalidArgumentError):
        h_coefficients(frame, 0.0, frame.normal)
