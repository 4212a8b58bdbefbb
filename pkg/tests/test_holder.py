from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from parabolic.config import HOLDER_SAFETY
from parabolic.exceptions import CertificationError, InvalidArgumentError
from parabolic.geometry import Point
from parabolic.holder import (
    PERIOD,
    HolderProfile,
    box_ball_mass,
    certify,
    holder_constant_estimate,
    nonflatness_trace,
    weierstrass_profile,
)
from parabolic.models import HolderGraph
from parabolic.particles import QuadratureRule, sample


def _graph_point(profile: HolderProfile, t: float) -> Point:
    return Point([float(profile(np.array([t]))[0])], t)


def test_single_level_constant() -> None:
    profile = weierstrass_profile(4, 0, seed=1)
    assert profile.holder_constant == pytest.approx(HOLDER_SAFETY)
    # sup |cos s - cos t| / |s - t|^{1/2}
    assert profile.holder_constant / profile.kappa == pytest.approx(1.20390, rel=1e-3)


def test_square_root_has_constant_one() -> None:
    assert holder_constant_estimate(np.sqrt, 1.0 / 1024, (0.0, 1.0)) == pytest.approx(1.0, rel=1e-12)


def test_estimate_grows_under_refinement() -> None:
    phases = (0.3, 1.7, 4.1)
    raw = HolderProfile(4, 2, phases, 1.0, np.inf)
    coarse = holder_constant_estimate(raw, PERIOD / 4096, raw.window, periodic=True)
    fine = holder_constant_estimate(raw, PERIOD / 8192, raw.window, periodic=True)
    assert fine >= coarse - 1e-12


def test_profiles_are_deterministic_and_scalable() -> None:
    a = weierstrass_profile(4, 2, seed=3)
    b = weierstrass_profile(4, 2, seed=3)
    assert a.phases == b.phases
    assert a.kappa == b.kappa
    half = a.scaled(0.5)
    assert half.holder_constant == pytest.approx(0.5 * a.holder_constant)
    t = np.linspace(0.0, 1.0, 7)
    np.testing.assert_allclose(half(t), 0.5 * a(t))


def test_certification_failures() -> None:
    with pytest.raises(CertificationError):
        certify(lambda t: 0.5 * t, (-10.0, 10.0), 0.01)
    with pytest.raises(CertificationError):
        HolderGraph(weierstrass_profile(4, 1, seed=0).scaled(2.0))
    with pytest.raises(InvalidArgumentError):
        weierstrass_profile(3, 1, seed=0)
    with pytest.raises(InvalidArgumentError):
        weierstrass_profile(4, -1, seed=0)


def test_box_ball_mass() -> None:
    profile = weierstrass_profile(4, 3, seed=5)
    x = _graph_point(profile, 0.8)
    report = box_ball_mass(profile, x, 0.25, N=20_000, seed=2)
    assert report.exact == pytest.approx(0.125)
    assert report.estimate.within(report.exact, k=4.0)
    assert report.koranyi_inner.value <= report.estimate.value <= report.koranyi_outer.value
    with pytest.raises(InvalidArgumentError):
        box_ball_mass(profile, Point([x.h[0] + 0.5], x.t), 0.25)


def test_flat_profile_trace() -> None:
    rows = nonflatness_trace(HolderProfile.flat(), Point([0.0], 0.0), [0.5, 0.25], N=2000, seed=4)
    assert [row.scale for row in rows] == [0.5, 0.25]
    for row in rows:
        assert row.F == 0.0
        assert row.beta == 0.0
        assert np.isfinite(row.flat_distance) and row.flat_distance >= 0.0
    with pytest.raises(InvalidArgumentError):
        nonflatness_trace(HolderProfile.flat(), Point([0.0], 0.0), [0.25, 0.5])


def test_graph_lattice_pushes_forward_lebesgue() -> None:
    profile = weierstrass_profile(4, 2, seed=6)
    mu = sample(HolderGraph(profile), 10, seed=0, proposal=QuadratureRule(nodes=(400_000,)))
    integrand = mu.coords[:, 0] ** 2 * np.exp(-mu.coords[:, -1] ** 2)
    expected, _ = integrate.quad(lambda t: float(profile(t)) ** 2 * np.exp(-t * t), -7.0, 7.0, limit=400)
    assert mu.integrate(integrand).value == pytest.approx(expected, rel=1e-6)
