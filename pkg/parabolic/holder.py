"""
Half-Hoelder graphs in P^1: lacunary Weierstrass-type profiles with a
certified grid Hoelder-1/2 constant, the exact box-metric ball mass of their
graph measure, and a multi-scale non-flatness trace under the Koranyi metric.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from parabolic.config import HOLDER_BASE_LAGS, HOLDER_MAX_POINTS, HOLDER_SAFETY
from parabolic.estimators import ball_mass, blowup, closed_form_ball_mass
from parabolic.exceptions import CertificationError, InvalidArgumentError
from parabolic.geometry import Metric, Point
from parabolic.models import HolderGraph
from parabolic.moments import flatness_functional
from parabolic.particles import MassEstimate, WindowProposal, sample
from parabolic.rectifiability import beta_numbers
from parabolic.transport import flat_distance
from parabolic.utils import derive_seed, parallel_map

logger = logging.getLogger(__name__)

PERIOD = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class HolderProfile:
    """
    f(t) = kappa * sum_{j=0}^{J} base^{-j/2} cos(base^j t + phase_j).

    With an integer base f is 2*pi periodic, so `holder_constant`, computed on
    one period, bounds |f(s) - f(t)| / |s - t|^{1/2} on the whole line up to grid
    resolution.
    """

    base: int
    levels: int
    phases: tuple[float, ...]
    kappa: float
    holder_constant: float
    seed: Optional[int] = None

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if self.kappa == 0.0:
            return out
        for j, phase in enumerate(self.phases):
            out += float(self.base) ** (-0.5 * j) * np.cos(float(self.base) ** j * t + phase)
        return self.kappa * out

    @property
    def window(self) -> tuple[float, float]:
        return (0.0, PERIOD)

    @classmethod
    def flat(cls) -> "HolderProfile":
        """f = 0: the graph is the vertical line h = 0."""
        return cls(base=4, levels=0, phases=(0.0,), kappa=0.0, holder_constant=0.0)

    def scaled(self, factor: float) -> "HolderProfile":
        return replace(self, kappa=self.kappa * factor, holder_constant=self.holder_constant * abs(factor))

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "levels": self.levels,
            "phases": list(self.phases),
            "kappa": self.kappa,
            "holder_constant": self.holder_constant,
            "seed": self.seed,
        }


def _lags(limit: int) -> np.ndarray:
    """1..B plus every m * 2^k with B/2 < m <= B, up to `limit`; closed under doubling."""
    base = min(HOLDER_BASE_LAGS, limit)
    lags = set(range(1, base + 1))
    head = np.arange(HOLDER_BASE_LAGS // 2 + 1, HOLDER_BASE_LAGS + 1)
    scale = 2
    while head[0] * scale <= limit:
        lags.update(int(m) for m in head * scale if m <= limit)
        scale *= 2
    return np.array(sorted(lags))


def holder_constant_estimate(
    f: Callable[[np.ndarray], np.ndarray],
    resolution: float,
    window: tuple[float, float],
    *,
    periodic: bool = False,
) -> float:
    """
    max of |f(s) - f(t)| / |s - t|^{1/2} over grid pairs of `window` at multi-scale lags.

    The grid is lo + i * resolution. With `periodic=True` the window is one
    period, differences wrap, and lags run up to half the period. Halving the
    resolution never decreases the estimate: grid and lag set only grow.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (np.isfinite(resolution) and resolution > 0):
        raise InvalidArgumentError("resolution must be positive")
    if not hi > lo:
        raise InvalidArgumentError("window must have positive length")
    if periodic:
        count = int(round((hi - lo) / resolution))
        if count < 2:
            raise InvalidArgumentError("resolution coarser than the period")
        limit = count // 2
    else:
        count = int(np.floor((hi - lo) / resolution * (1.0 + 1e-12))) + 1
        limit = count - 1
    if count > HOLDER_MAX_POINTS:
        raise InvalidArgumentError(f"{count} grid points exceed the limit {HOLDER_MAX_POINTS}")
    grid = lo + resolution * np.arange(count)
    values = np.asarray(f(grid), dtype=float)
    best = 0.0
    for lag in _lags(limit):
        if periodic:
            diff = np.roll(values, -int(lag)) - values
        else:
            diff = values[lag:] - values[:-lag]
        best = max(best, float(np.abs(diff).max()) / np.sqrt(lag * resolution))
    logger.debug("holder estimate %.6g over %d points", best, count)
    return best


def certify(
    f: Callable[[np.ndarray], np.ndarray],
    window: tuple[float, float],
    resolution: float,
    *,
    periodic: bool = False,
) -> float:
    """Grid Hoelder-1/2 constant of f; raises when it exceeds 1."""
    constant = holder_constant_estimate(f, resolution, window, periodic=periodic)
    if constant > 1.0:
        raise CertificationError(constant, 1.0)
    return constant


def _certification_points(base: int, levels: int) -> int:
    points = 1 << max(12, int(np.ceil(np.log2(64 * float(base) ** levels))))
    if points > HOLDER_MAX_POINTS:
        raise InvalidArgumentError(f"base={base}, levels={levels} needs {points} grid points")
    return points


def weierstrass_profile(a: int, J: int, seed: int) -> HolderProfile:
    """Random phases from `seed`; kappa chosen so the certified constant equals HOLDER_SAFETY."""
    if int(a) != a or a < 4:
        raise InvalidArgumentError(f"base must be an integer >= 4, got {a}")
    if J < 0:
        raise InvalidArgumentError(f"levels must be >= 0, got {J}")
    rng = np.random.default_rng(derive_seed(seed, "weierstrass"))
    phases = tuple(float(p) for p in rng.uniform(0.0, PERIOD, J + 1))
    raw = HolderProfile(int(a), int(J), phases, 1.0, np.inf, seed)
    points = _certification_points(int(a), int(J))
    unit = holder_constant_estimate(raw, PERIOD / points, raw.window, periodic=True)
    kappa = HOLDER_SAFETY / unit
    logger.info("weierstrass profile a=%d J=%d seed=%d raw constant %.6g", a, J, seed, unit)
    return replace(raw, kappa=kappa, holder_constant=kappa * unit)


@dataclass(frozen=True)
class BoxBallReport:
    exact: float
    estimate: MassEstimate
    koranyi_inner: MassEstimate
    koranyi_outer: MassEstimate

    def to_dict(self) -> dict:
        return {
            "exact": self.exact,
            "estimate": self.estimate.to_dict(),
            "koranyi_inner": self.koranyi_inner.to_dict(),
            "koranyi_outer": self.koranyi_outer.to_dict(),
        }


def box_ball_mass(profile: HolderProfile, x: Point, r: float, *, N: int = 20_000, seed: int = 0) -> BoxBallReport:
    """
    Exact mass 2 r^2 of the box ball B_inf(x, r) for the graph measure, with
    particle estimates of it and of the Koranyi balls of radii r and 2^{1/4} r
    that it sits between.
    """
    if not (np.isfinite(r) and r > 0):
        raise InvalidArgumentError("r must be positive")
    if x.n != 1:
        raise InvalidArgumentError("graph points live in P^1")
    if abs(float(profile(np.array([x.t]))[0]) - x.h[0]) > 1e-9:
        raise InvalidArgumentError("x is not on the graph")
    model = HolderGraph(profile)
    outer = 2.0**0.25 * r
    cloud = sample(model, N, derive_seed(seed, "box-ball"), proposal=WindowProposal(x, outer))
    return BoxBallReport(
        exact=closed_form_ball_mass(model, x, r, Metric.BOX),
        estimate=ball_mass(cloud, x, r, Metric.BOX),
        koranyi_inner=ball_mass(cloud, x, r),
        koranyi_outer=ball_mass(cloud, x, outer),
    )


@dataclass(frozen=True)
class TraceRow:
    scale: float
    F: float
    beta: float
    flat_distance: float

    def to_dict(self) -> dict:
        return {"scale": self.scale, "F": self.F, "beta": self.beta, "flat_distance": self.flat_distance}


def nonflatness_trace(
    profile: HolderProfile,
    x: Point,
    scales: Sequence[float],
    *,
    N: int = 20_000,
    seed: int = 0,
    jobs: int = 1,
) -> list[TraceRow]:
    """
    For each scale r, the graph measure blown up at x (r^{-2} T_{x,r}) is
    measured at unit scale: flatness functional, beta number and flat distance.
    No convergence is asserted; the rows are the trajectory.
    """
    scales = [float(r) for r in scales]
    if any(r <= 0 for r in scales) or any(b >= a for a, b in zip(scales, scales[1:])):
        raise InvalidArgumentError("scales must be positive and strictly decreasing")
    model = HolderGraph(profile)
    origin = Point.origin(1)

    def row(indexed: tuple[int, float]) -> TraceRow:
        i, r = indexed
        cloud = sample(model, N, derive_seed(seed, "trace", i), proposal=WindowProposal(x, 3.0 * r))
        blown = blowup(cloud, x, r, h=2)
        return TraceRow(
            scale=r,
            F=flatness_functional(blown).value,
            beta=beta_numbers(blown, origin, 1.0).beta,
            flat_distance=flat_distance(blown, origin, 1.0, 2).value,
        )

    return parallel_map(row, list(enumerate(scales)), jobs)
