"""Ball masses, densities and blowups of particle measures."""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from parabolic.exceptions import EmptyMeasureError, InvalidArgumentError
from parabolic.geometry import Metric, Point, distances, plane_distance
from parabolic.models import FlatPlane, HolderGraph, MeasureModel, VerticalLine, flat_normalization
from parabolic.particles import MassEstimate, ParticleMeasure
from parabolic.utils import ball_volume, sphere_area

logger = logging.getLogger(__name__)


def _check_radius(r: float) -> None:
    if not (np.isfinite(r) and r > 0):
        raise InvalidArgumentError(f"radius must be positive, got {r}")


def _flat_koranyi_mass(n: int, delta: float, r: float) -> float:
    """Unnormalized H^{n-1} x L^1 mass of a Koranyi ball at horizontal distance delta from the plane."""
    if delta >= r:
        return 0.0
    if n == 1:
        return 2.0 * np.sqrt(r**4 - delta**4)
    if delta == 0.0:
        return r ** (n + 1) / flat_normalization(n)
    rho_max = np.sqrt(r**2 - delta**2)

    def slab(rho):
        return rho ** (n - 2) * 2.0 * np.sqrt(max(r**4 - (rho**2 + delta**2) ** 2, 0.0))

    value, _ = integrate.quad(slab, 0.0, rho_max, epsabs=0.0, epsrel=1e-12)
    return sphere_area(n - 2) * value


def closed_form_ball_mass(model: MeasureModel, x: Point, r: float, metric: Metric) -> Optional[float]:
    """Exact mass of B(x, r) where a closed form exists, else None."""
    _check_radius(r)
    match model:
        case FlatPlane():
            delta = plane_distance(x, model.plane)
            if metric == Metric.KORANYI:
                return model.normalization * _flat_koranyi_mass(model.n, delta, r)
            if delta > r:
                return 0.0
            return model.normalization * ball_volume(model.n - 1, np.sqrt(r**2 - delta**2)) * 2.0 * r**2
        case VerticalLine():
            delta = float(np.linalg.norm(x.h - model.base.h))
            if metric == Metric.KORANYI:
                return model.normalization * 2.0 * np.sqrt(max(r**4 - delta**4, 0.0))
            return model.normalization * 2.0 * r**2 if delta <= r else 0.0
        case HolderGraph():
            on_graph = abs(float(model.profile(np.array([x.t]))[0]) - x.h[0]) <= 1e-12 * max(1.0, abs(x.h[0]))
            if metric == Metric.BOX and on_graph:
                return model.normalization * 2.0 * r**2
    return None


def ball_mass(
    mu: ParticleMeasure, x: Point, r: float, metric: Metric = Metric.KORANYI, *, exact: bool = False
) -> MassEstimate:
    """
    Weighted mass of the atoms in B(x, r).

    With `exact=True` and a cloud still tied to a model that has a closed-form
    ball mass, the closed form is returned with zero standard error.
    """
    _check_radius(r)
    if mu.size == 0:
        raise EmptyMeasureError("measure has no atoms")
    if exact and mu.model is not None:
        value = closed_form_ball_mass(mu.model, x, r, metric)
        if value is not None:
            return MassEstimate(float(value), 0.0, 0)
    inside = distances(mu.coords, x, metric) <= r
    return mu.integrate(inside.astype(float))


def ball_masses(
    mu: ParticleMeasure, x: Point, radii: Sequence[float], metric: Metric = Metric.KORANYI
) -> list[MassEstimate]:
    if mu.size == 0:
        raise EmptyMeasureError("measure has no atoms")
    d = distances(mu.coords, x, metric)
    return [mu.integrate((d <= r).astype(float)) for r in radii]


def blowup(mu: ParticleMeasure, x: Point, r: float, h: float) -> ParticleMeasure:
    """r^{-h} T_{x,r} mu: atoms p -> delta_{1/r}(p - x), weights times r^{-h}."""
    _check_radius(r)
    coords = np.array(mu.coords)
    coords[:, :-1] = (coords[:, :-1] - x.h) / r
    coords[:, -1] = (coords[:, -1] - x.t) / r**2
    return mu.transformed(coords, r ** (-h))


def density_curve(
    mu: ParticleMeasure,
    x: Point,
    radii: Sequence[float],
    h: float,
    metric: Metric = Metric.KORANYI,
) -> list[MassEstimate]:
    """mu(B(x, r)) / r^h for each radius."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(np.diff(radii) < 0):
        raise InvalidArgumentError("radii must be positive and sorted")
    return [m.scaled(r**-h) for m, r in zip(ball_masses(mu, x, radii, metric), radii)]
