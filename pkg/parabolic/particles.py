"""Seeded, importance-weighted particle clouds approximating the analytic measure models."""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.stats import norm as normal_dist

from parabolic.config import GAUSS_H_SCALE, GAUSS_T_SCALE, KP_RADIAL_SCALE, QUAD_H_EXTENT, QUAD_T_EXTENT
from parabolic.exceptions import DimensionMismatchError, InvalidArgumentError, UnsupportedModelError
from parabolic.geometry import Metric, Point, distances
from parabolic.models import ConeCylinder, FlatPlane, HolderGraph, MeasureModel, QuadricGraph, VerticalLine
from parabolic.utils import ball_volume, derive_seed, sphere_area, uniform_cap, uniform_sphere

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MassEstimate:
    value: float
    std_error: float
    n_samples: int

    def within(self, target: float, k: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.value - target) <= k * self.std_error + atol

    def scaled(self, factor: float) -> "MassEstimate":
        return MassEstimate(self.value * factor, self.std_error * abs(factor), self.n_samples)

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_samples": self.n_samples}


@dataclass(frozen=True, eq=False)
class VectorEstimate:
    values: np.ndarray
    std_errors: np.ndarray
    n_samples: int

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "std_errors": self.std_errors.tolist(), "n_samples": self.n_samples}


@dataclass(frozen=True, eq=False)
class ParticleMeasure:
    """
    Weighted atoms (rows of `coords`: h_1..h_n, t) estimating integrals against a measure.

    Atoms come in strata. Stratum k holds the kept atoms of `counts[k]`
    independent draws (draws that were rejected count but carry no atom), so
    sum(w f) is unbiased and its variance is estimated per stratum. A count of
    0 marks a deterministic quadrature stratum with no sampling error.
    """

    coords: np.ndarray
    weights: np.ndarray
    strata: np.ndarray
    counts: tuple[int, ...]
    seed: int = 0
    model: Optional[MeasureModel] = None
    total_mass_hint: Optional[float] = None

    def __post_init__(self):
        coords = np.ascontiguousarray(np.atleast_2d(np.asarray(self.coords, dtype=float)))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        strata = np.asarray(self.strata, dtype=np.int64).reshape(-1)
        if coords.shape[0] != weights.shape[0] or strata.shape[0] != weights.shape[0]:
            raise InvalidArgumentError("coords, weights and strata must have the same length")
        if coords.shape[1] < 2:
            raise InvalidArgumentError("coords need n >= 1 horizontal columns plus t")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)) or not np.all(np.isfinite(coords)):
            raise InvalidArgumentError("weights must be finite and non-negative, coords finite")
        for arr in (coords, weights, strata):
            arr.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "strata", strata)
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @property
    def n(self) -> int:
        return self.coords.shape[1] - 1

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    @property
    def atoms(self) -> list[tuple[Point, float]]:
        return [(Point.from_coords(c), float(w)) for c, w in zip(self.coords, self.weights)]

    @property
    def homogeneous_dimension(self) -> Optional[int]:
        return None if self.model is None else self.model.homogeneous_dimension

    @property
    def n_samples(self) -> int:
        total = sum(self.counts)
        return total if total > 0 else self.size

    def integrate(self, values) -> MassEstimate:
        """Estimate of the integral of f, given f at every atom."""
        values = np.broadcast_to(np.asarray(values, dtype=float), (self.size,))
        contrib = self.weights * values
        s1 = np.bincount(self.strata, weights=contrib, minlength=len(self.counts))
        s2 = np.bincount(self.strata, weights=contrib * contrib, minlength=len(self.counts))
        return MassEstimate(float(contrib.sum()), float(np.sqrt(self._variance(s1, s2))), self.n_samples)

    def integrate_vector(self, values) -> VectorEstimate:
        """Componentwise estimates for an (m, ...) array of integrand values."""
        values = np.asarray(values, dtype=float)
        shape = values.shape[1:]
        flat = values.reshape(self.size, -1)
        contrib = self.weights[:, None] * flat
        k = len(self.counts)
        s1 = np.zeros((k, flat.shape[1]))
        s2 = np.zeros((k, flat.shape[1]))
        np.add.at(s1, self.strata, contrib)
        np.add.at(s2, self.strata, contrib * contrib)
        var = self._variance(s1, s2)
        return VectorEstimate(contrib.sum(axis=0).reshape(shape), np.sqrt(var).reshape(shape), self.n_samples)

    def _variance(self, s1: np.ndarray, s2: np.ndarray):
        counts = np.asarray(self.counts, dtype=float).reshape((-1,) + (1,) * (s1.ndim - 1))
        sampled = counts > 1
        safe = np.where(sampled, counts, 2.0)
        var = np.where(sampled, (safe * s2 - s1 * s1) / (safe - 1.0), 0.0)
        return np.clip(var, 0.0, None).sum(axis=0)

    def total_mass(self) -> MassEstimate:
        return self.integrate(1.0)

    def restrict(self, mask: np.ndarray) -> "ParticleMeasure":
        """Drops atoms outside `mask`; draw counts are kept so estimates stay unbiased."""
        mask = np.asarray(mask, dtype=bool)
        return replace(
            self,
            coords=self.coords[mask],
            weights=self.weights[mask],
            strata=self.strata[mask],
            total_mass_hint=None,
        )

    def union(self, other: "ParticleMeasure") -> "ParticleMeasure":
        """Sum of two measures; meant for clouds covering disjoint regions."""
        if other.n != self.n:
            raise DimensionMismatchError(self.n, other.n)
        model = self.model if self.model is other.model else None
        return ParticleMeasure(
            coords=np.vstack([self.coords, other.coords]),
            weights=np.concatenate([self.weights, other.weights]),
            strata=np.concatenate([self.strata, other.strata + len(self.counts)]),
            counts=self.counts + other.counts,
            seed=self.seed,
            model=model,
        )

    def transformed(self, coords: np.ndarray, weight_factor: float) -> "ParticleMeasure":
        return replace(
            self, coords=coords, weights=self.weights * weight_factor, model=None, total_mass_hint=None
        )


@dataclass(frozen=True)
class GaussianProposal:
    """Gaussian in the model's parameters, centred on the projection of `center`."""

    scale: float = 1.0
    center: Optional[Point] = None


@dataclass(frozen=True)
class WindowProposal:
    """Uniform in a parameter box covering the box-metric ball B(center, radius); atoms outside it are dropped."""

    center: Point
    radius: float


@dataclass(frozen=True)
class QuadratureRule:
    """
    Deterministic midpoint lattice over [-4.5s, 4.5s]^k x [-7s^2, 7s^2] around `center`.

    `nodes` fixes the node count per parameter axis; by default N is split evenly.
    """

    scale: float = 1.0
    center: Optional[Point] = None
    nodes: Optional[tuple[int, ...]] = None


Proposal = Union[GaussianProposal, WindowProposal, QuadratureRule]


@dataclass
class _Draw:
    params: np.ndarray
    weights: np.ndarray
    count: int


def _gaussian_params(rng, N, center_params, h_dims, scale):
    scales = np.array([GAUSS_H_SCALE * scale] * h_dims + [GAUSS_T_SCALE * scale**2])
    params = center_params + scales * rng.standard_normal((N, h_dims + 1))
    pdf = np.prod(normal_dist.pdf(params, loc=center_params, scale=scales), axis=1)
    return params, 1.0 / (N * pdf)


def _window_params(rng, N, center_params, h_dims, radius):
    half = np.array([radius] * h_dims + [radius**2])
    params = center_params + half * (2.0 * rng.random((N, h_dims + 1)) - 1.0)
    return params, np.full(N, np.prod(2.0 * half) / N)


def _lattice_params(N, center_params, h_dims, scale, nodes=None):
    dims = h_dims + 1
    if nodes is None:
        per_dim = np.full(dims, max(2, int(round(N ** (1.0 / dims)))))
    elif len(nodes) != dims or min(nodes) < 1:
        raise InvalidArgumentError(f"lattice needs {dims} positive node counts, got {nodes}")
    else:
        per_dim = np.asarray(nodes)
    half = np.array([QUAD_H_EXTENT * scale] * h_dims + [QUAD_T_EXTENT * scale**2])
    step = 2.0 * half / per_dim
    axes = [c - hw + (np.arange(k) + 0.5) * s for c, hw, s, k in zip(center_params, half, step, per_dim)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)
    return grid, np.full(grid.shape[0], np.prod(step))


def _vertical_params(rng, N, proposal, center_params, h_dims) -> _Draw:
    """Parameters (a, t) of a vertically invariant set with h_dims horizontal directions."""
    if isinstance(proposal, WindowProposal):
        params, w = _window_params(rng, N, center_params, h_dims, proposal.radius)
        return _Draw(params, w, N)
    if isinstance(proposal, QuadratureRule):
        params, w = _lattice_params(N, center_params, h_dims, proposal.scale, proposal.nodes)
        return _Draw(params, w, 0)
    params, w = _gaussian_params(rng, N, center_params, h_dims, proposal.scale)
    return _Draw(params, w, N)


def _proposal_center(proposal: Proposal) -> Optional[Point]:
    return proposal.center


def _sample_flat(model: FlatPlane, N, rng, proposal) -> tuple[np.ndarray, _Draw]:
    center = _proposal_center(proposal)
    basis = model.plane.basis()
    center_params = np.zeros(model.n)
    if center is not None:
        center_params[:-1] = basis.T @ (center.h - model.plane.base_point())
        center_params[-1] = center.t
    draw = _vertical_params(rng, N, proposal, center_params, model.n - 1)
    return model.parametrize(draw.params), draw


def _sample_vertical_line(model: VerticalLine, N, rng, proposal):
    center = _proposal_center(proposal)
    center_params = np.array([0.0 if center is None else center.t])
    draw = _vertical_params(rng, N, proposal, center_params, 0)
    h = np.broadcast_to(model.base.h, (draw.params.shape[0], model.n))
    return np.column_stack([h, draw.params[:, -1]]), draw


def _sample_holder(model: HolderGraph, N, rng, proposal):
    center = _proposal_center(proposal)
    center_params = np.array([0.0 if center is None else center.t])
    draw = _vertical_params(rng, N, proposal, center_params, 0)
    t = draw.params[:, -1]
    return np.column_stack([model.profile(t), t]), draw


def _sample_quadric(model: QuadricGraph, N, rng, proposal):
    n = model.n
    if isinstance(proposal, QuadratureRule):
        raise UnsupportedModelError("quadrature lattices are not available for quadric graphs")
    if isinstance(proposal, WindowProposal):
        R = proposal.radius
        y = proposal.center.h + R * uniform_sphere(rng, N, n) * rng.random((N, 1)) ** (1.0 / n)
        w = np.full(N, ball_volume(n, R) / N)
    else:
        scale = GAUSS_H_SCALE * proposal.scale
        mu = np.zeros(n) if proposal.center is None else proposal.center.h
        y = mu + scale * rng.standard_normal((N, n))
        w = 1.0 / (N * np.prod(normal_dist.pdf(y, loc=mu, scale=scale), axis=1))
    coords = np.column_stack([y, model.height(y)])
    return coords, _Draw(y, w * model.gradient_norm(y), N)


def _sample_cone(model: ConeCylinder, N, rng, proposal):
    """Cone in coordinates (rho, omega_P, omega_M, w, t) with area element sqrt(2) rho^{p+m-2}."""
    if isinstance(proposal, QuadratureRule):
        raise UnsupportedModelError("quadrature lattices are not available for cones")
    P, M, Z = model.frame
    p, m, z = P.shape[1], M.shape[1], Z.shape[1]
    area_p, area_m = sphere_area(p - 1), sphere_area(m - 1)
    if isinstance(proposal, WindowProposal):
        R, x = proposal.radius, proposal.center
        x_p, x_m, x_w = P.T @ x.h, M.T @ x.h, Z.T @ x.h
        r_pm = np.hypot(np.linalg.norm(x_p), np.linalg.norm(x_m))
        lo, hi = max(0.0, (r_pm - R) / np.sqrt(2.0)), (r_pm + R) / np.sqrt(2.0)
        rho = lo + (hi - lo) * rng.random(N)
        omega_p, frac_p = _cap(rng, N, x_p, R)
        omega_m, frac_m = _cap(rng, N, x_m, R)
        w = x_w + R * (2.0 * rng.random((N, z)) - 1.0)
        t = x.t + R**2 * (2.0 * rng.random(N) - 1.0)
        inv_pdf = np.full(N, (hi - lo) * area_p * frac_p * area_m * frac_m * (2.0 * R) ** z * 2.0 * R**2)
    else:
        sigma = KP_RADIAL_SCALE * proposal.scale
        rho = np.abs(sigma * rng.standard_normal(N))
        omega_p = uniform_sphere(rng, N, p)
        omega_m = uniform_sphere(rng, N, m)
        w = GAUSS_H_SCALE * proposal.scale * rng.standard_normal((N, z))
        t = GAUSS_T_SCALE * proposal.scale**2 * rng.standard_normal(N)
        pdf = (
            2.0 * normal_dist.pdf(rho, scale=sigma)
            * np.prod(normal_dist.pdf(w, scale=GAUSS_H_SCALE * proposal.scale), axis=1)
            * normal_dist.pdf(t, scale=GAUSS_T_SCALE * proposal.scale**2)
        )
        inv_pdf = area_p * area_m / pdf
    y = (rho[:, None] * omega_p) @ P.T + (rho[:, None] * omega_m) @ M.T + w @ Z.T
    weights = np.sqrt(2.0) * rho ** (p + m - 2) * inv_pdf / N
    return np.column_stack([y, t]), _Draw(rho[:, None], weights, N)


def _cap(rng, N, axis_point: np.ndarray, radius: float):
    norm = np.linalg.norm(axis_point)
    if norm <= radius:
        return uniform_sphere(rng, N, axis_point.shape[0]), 1.0
    return uniform_cap(rng, N, axis_point / norm, float(np.arcsin(radius / norm)))


def sample(
    model: MeasureModel, N: int, seed: int, *, proposal: Optional[Proposal] = None
) -> ParticleMeasure:
    """
    Draws N parameter samples and returns the weighted cloud.

    Weighted sums over the result estimate integrals against `model`'s measure.
    Same (model, N, seed, proposal) gives bit-identical atoms.
    """
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    if isinstance(proposal, WindowProposal) and proposal.radius <= 0:
        raise InvalidArgumentError("window radius must be positive")
    proposal = proposal or GaussianProposal()
    center = _proposal_center(proposal)
    if center is not None and center.n != model.n:
        raise DimensionMismatchError(model.n, center.n)
    rng = np.random.default_rng(seed)

    match model:
        case FlatPlane():
            coords, draw = _sample_flat(model, N, rng, proposal)
        case VerticalLine():
            coords, draw = _sample_vertical_line(model, N, rng, proposal)
        case HolderGraph():
            coords, draw = _sample_holder(model, N, rng, proposal)
        case QuadricGraph():
            coords, draw = _sample_quadric(model, N, rng, proposal)
        case ConeCylinder():
            coords, draw = _sample_cone(model, N, rng, proposal)
        case _:
            raise UnsupportedModelError(f"cannot sample {type(model).__name__}")

    weights = model.normalization * draw.weights
    keep = np.ones(coords.shape[0], dtype=bool)
    if isinstance(proposal, WindowProposal):
        keep = distances(coords, proposal.center, Metric.BOX) <= proposal.radius
    logger.info(
        "sampled %s n=%d N=%d kept=%d proposal=%s",
        model.kind, model.n, N, int(keep.sum()), type(proposal).__name__,
    )
    return ParticleMeasure(
        coords=coords[keep],
        weights=weights[keep],
        strata=np.zeros(int(keep.sum()), dtype=np.int64),
        counts=(draw.count,),
        seed=seed,
        model=model,
    )


def sample_shells(
    model: MeasureModel, center: Point, r_min: float, r_max: float, N_per_shell: int, seed: int
) -> ParticleMeasure:
    """
    The measure restricted to the Koranyi ball B(center, r_max), sampled shell by shell.

    Shells are dyadic annuli r_max 2^{-j-1} < d <= r_max 2^{-j}; the innermost
    one is a full ball of radius <= r_min. Each shell is its own stratum.
    """
    if not 0 < r_min <= r_max:
        raise InvalidArgumentError("need 0 < r_min <= r_max")
    levels = int(np.ceil(np.log2(r_max / r_min))) + 1
    cloud = None
    for j in range(levels):
        outer = r_max * 2.0**-j
        part = sample(model, N_per_shell, derive_seed(seed, "shell", j), proposal=WindowProposal(center, outer))
        d = distances(part.coords, center)
        inner = 0.0 if j == levels - 1 else outer / 2
        part = part.restrict((d <= outer) & (d > inner))
        cloud = part if cloud is None else cloud.union(part)
    return replace(cloud, seed=seed, model=model)


def write_csv(measure: ParticleMeasure, path: str | Path) -> None:
    """Header `n,<int>` then one row `h1,...,hn,t,weight` per atom, 17 significant digits."""
    path = Path(path)
    rows = np.column_stack([measure.coords, measure.weights])
    with path.open("w") as handle:
        handle.write(f"n,{measure.n}\n")
        np.savetxt(handle, rows, fmt="%.17g", delimiter=",")


def read_csv(path: str | Path) -> ParticleMeasure:
    """Loads a cloud written by `write_csv`; all atoms form one sampled stratum."""
    path = Path(path)
    with path.open() as handle:
        header = handle.readline().strip().split(",")
        if len(header) != 2 or header[0] != "n":
            raise InvalidArgumentError(f"{path}: expected header 'n,<int>', got {','.join(header)!r}")
        n = int(header[1])
        rows = np.loadtxt(handle, delimiter=",", ndmin=2)
    if rows.size == 0:
        rows = np.zeros((0, n + 2))
    if rows.shape[1] != n + 2:
        raise DimensionMismatchError(n, rows.shape[1] - 2)
    return ParticleMeasure(
        coords=rows[:, :-1],
        weights=rows[:, -1],
        strata=np.zeros(rows.shape[0], dtype=np.int64),
        counts=(rows.shape[0],),
    )
