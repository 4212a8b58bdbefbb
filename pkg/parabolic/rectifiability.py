"""
Flatness numbers of particle measures: beta and bilateral beta on Koranyi
balls, parabolic dyadic cubes with Carleson sums, a weak-constant-density
probe, the truncated odd kernel operator and the density square function.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.stats import qmc

from parabolic.config import (
    BBETA_ATOM_WINDOW,
    BBETA_PLANE_POINTS,
    BETA_GRID_PER_ORTHANT,
    BETA_REFINE_STEPS,
    MIN_CUBE_ATOMS,
    MIN_RESOLUTION_ATOMS,
    PRUNE_FRACTION,
    SQUARE_FUNCTION_NODES_PER_DECADE,
    WCD_SAMPLES,
)
from parabolic.exceptions import EmptyMeasureError, InvalidArgumentError
from parabolic.geometry import Metric, Point, VerticalHyperplane, distances, pair_distances
from parabolic.models import FlatPlane, VerticalLine
from parabolic.particles import ParticleMeasure, VectorEstimate
from parabolic.utils import derive_seed, fibonacci_directions, parallel_map, pattern_search_sphere

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaPair:
    beta: float
    bbeta: float
    best_plane: VerticalHyperplane

    def to_dict(self) -> dict:
        return {"beta": self.beta, "bbeta": self.bbeta, "best_plane": self.best_plane.to_dict()}


def _widths(points: np.ndarray, directions: np.ndarray) -> np.ndarray:
    proj = points @ directions.T
    return proj.max(axis=0) - proj.min(axis=0)


def _hull_normals(points: np.ndarray) -> np.ndarray:
    n = points.shape[1]
    if n < 2 or points.shape[0] <= n:
        return np.zeros((0, n))
    try:
        hull = ConvexHull(points)
    except QhullError:
        # Degenerate (lower-dimensional) projection: its width is zero along some normal anyway.
        return np.zeros((0, n))
    normals = hull.equations[:, :n]
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def nearest_distances(atoms: np.ndarray, points: np.ndarray, scale: float) -> np.ndarray:
    """
    Exact Koranyi distance from each point to its nearest atom.

    A Euclidean kd-tree on (h/scale, t/scale^2) gives a candidate and an upper
    bound d; every atom within d satisfies |dh| <= d and |dt| <= d^2, so one
    Chebyshev ball query per point finds the true nearest.
    """
    if atoms.shape[0] == 0:
        return np.full(points.shape[0], np.inf)
    weights = np.append(np.full(atoms.shape[1] - 1, 1.0 / scale), 1.0 / scale**2)
    tree = cKDTree(atoms * weights)
    k = min(8, atoms.shape[0])
    _, idx = tree.query(points * weights, k=k)
    idx = np.asarray(idx).reshape(points.shape[0], k)
    upper = pair_distances(atoms[idx], points[:, None, :]).min(axis=1)
    reach = np.maximum(upper / scale, (upper / scale) ** 2) * (1.0 + 1e-12)
    out = np.empty(points.shape[0])
    for i, candidates in enumerate(tree.query_ball_point(points * weights, reach, p=np.inf)):
        out[i] = pair_distances(atoms[candidates], points[i][None, :]).min() if candidates else upper[i]
    return np.minimum(out, upper)


def _support_gaps(mu: ParticleMeasure, window: np.ndarray, points: np.ndarray, r: float) -> np.ndarray:
    """Distance from each point to the support: exact for flat models still tied to the cloud, else to the nearest atom."""
    match mu.model:
        case FlatPlane():
            return np.abs(mu.model.plane.signed_distance(points))
        case VerticalLine():
            return np.linalg.norm(points[:, :-1] - mu.model.base.h, axis=1)
    return nearest_distances(window, points, r)


def plane_points_in_ball(plane: VerticalHyperplane, center: Point, r: float, count: int) -> np.ndarray:
    """At least `count` Sobol points of `plane` inside the Koranyi ball B(center, r), when the two meet."""
    n = plane.n
    basis = plane.basis()
    a_center = basis.T @ (center.h - plane.base_point())
    half = np.array([r] * (n - 1) + [r**2])
    m = int(np.ceil(np.log2(count)))
    for _ in range(8):
        sobol = qmc.Sobol(d=n, scramble=False).random_base2(m)
        params = np.append(a_center, center.t) + half * (2.0 * sobol - 1.0)
        coords = np.column_stack([plane.base_point() + params[:, :-1] @ basis.T, params[:, -1]])
        coords = coords[distances(coords, center) <= r]
        if coords.shape[0] >= count:
            break
        m += 1
    return coords


def beta_numbers(
    mu: ParticleMeasure,
    center: Point,
    r: float,
    *,
    grid_per_orthant: int = BETA_GRID_PER_ORTHANT,
    refine_steps: int = BETA_REFINE_STEPS,
    plane_points: int = BBETA_PLANE_POINTS,
) -> BetaPair:
    """
    beta = min over unit normals u of the width of <u, p_H> over atoms in
    B(center, r), divided by 2r; the plane sits at mid-range. bbeta adds the
    largest distance (over r) from points of that plane inside the ball to
    the support, so it upper-estimates the bilateral number.
    """
    if not (np.isfinite(r) and r > 0):
        raise InvalidArgumentError(f"radius must be positive, got {r}")
    d = distances(mu.coords, center)
    inside = d <= r
    if not inside.any():
        raise EmptyMeasureError("ball does not meet the support")
    pts = mu.coords[inside, :-1]
    n = mu.n

    if n == 1:
        u = np.ones(1)
        width = float(pts.max() - pts.min())
    else:
        candidates = np.vstack([fibonacci_directions(n, 2**n * grid_per_orthant), _hull_normals(pts)])
        widths = _widths(pts, candidates)
        best = int(np.argmin(widths))

        def objective(v: np.ndarray) -> float:
            return float(_widths(pts, v[None, :])[0])

        u, width = pattern_search_sphere(objective, candidates[best], np.pi / (2**n * grid_per_orthant), refine_steps)
    proj = pts @ u
    plane = VerticalHyperplane(u, 0.5 * (float(proj.max()) + float(proj.min())))
    beta = width / (2.0 * r)

    samples = plane_points_in_ball(plane, center, r, plane_points)
    gap = _support_gaps(mu, mu.coords[d <= BBETA_ATOM_WINDOW * r], samples, r) if samples.shape[0] else np.zeros(1)
    gap = np.minimum(gap, BBETA_ATOM_WINDOW * r)
    return BetaPair(beta, beta + float(gap.max()) / r, plane)


@dataclass(eq=False)
class Cube:
    generation: int
    key: tuple[int, ...]
    indices: np.ndarray
    mass: float
    center: Point
    parent: Optional[int]
    children: list[int] = field(default_factory=list)
    retained: bool = True
    beta: Optional[float] = None
    bbeta: Optional[float] = None

    @property
    def side(self) -> float:
        return 2.0**-self.generation

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "key": list(self.key),
            "center": self.center.to_dict(),
            "mass": self.mass,
            "atoms": int(self.indices.shape[0]),
            "retained": self.retained,
            "beta": self.beta,
            "bbeta": self.bbeta,
        }


@dataclass(eq=False)
class CubeTree:
    """Parabolic dyadic boxes (side 2^-j horizontally, 4^-j in time) met by the cloud."""

    measure: ParticleMeasure
    j0: int
    depth: int
    cubes: list[Cube]
    generations: dict[int, list[int]]

    def cubes_at(self, j: int) -> list[Cube]:
        return [self.cubes[i] for i in self.generations.get(j, [])]

    def descendants(self, index: int) -> list[int]:
        out, stack = [], [index]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(self.cubes[i].children)
        return out

    def diagnostics(self) -> list[dict]:
        """Per generation: cube counts, diameter ratio range, mass ratios, inner-point ratio."""
        rows = []
        n = self.measure.n
        for j in range(self.j0, self.j0 + self.depth + 1):
            cubes = self.cubes_at(j)
            kept = [c for c in cubes if c.retained]
            row = {"generation": j, "cubes": len(cubes), "retained": len(kept)}
            if kept:
                side = 2.0**-j
                diam = np.array([_diameter(self.measure.coords[c.indices]) / side for c in kept])
                mass = np.array([c.mass / side ** (n + 1) for c in kept])
                inner = np.array([_inner_ratio(self.measure.coords, c) for c in kept])
                median = float(np.median(mass))
                row.update(
                    {
                        "diameter_ratio_min": float(diam.min()),
                        "diameter_ratio_max": float(diam.max()),
                        "mass_ratio_median": median,
                        "mass_ratio_min": float(mass.min() / median) if median > 0 else 0.0,
                        "mass_ratio_max": float(mass.max() / median) if median > 0 else 0.0,
                        "inner_ratio_min": float(inner.min()),
                    }
                )
            rows.append(row)
        return rows

    def to_jsonl(self, path: str | Path) -> None:
        with Path(path).open("w") as handle:
            for cube in self.cubes:
                handle.write(json.dumps(cube.to_dict(), sort_keys=True) + "\n")


def _diameter(coords: np.ndarray, cap: int = 400) -> float:
    if coords.shape[0] > cap:
        coords = coords[np.linspace(0, coords.shape[0] - 1, cap).round().astype(int)]
    return float(pair_distances(coords[:, None, :], coords[None, :, :]).max())


def _inner_ratio(coords: np.ndarray, cube: Cube) -> float:
    """Distance from the cube centre to the nearest atom outside the cube, over the side, capped at 1."""
    side = cube.side
    d = distances(coords, cube.center, Metric.BOX)
    near = np.flatnonzero(d <= side)
    outside = np.setdiff1d(near, cube.indices, assume_unique=False)
    if outside.size == 0:
        return 1.0
    return min(1.0, float(distances(coords[outside], cube.center).min()) / side)


def _cube_keys(coords: np.ndarray, j: int) -> np.ndarray:
    h = np.floor(coords[:, :-1] * 2.0**j)
    t = np.floor(coords[:, -1:] * 4.0**j)
    return np.hstack([h, t]).astype(np.int64)


def dyadic_decompose(
    mu: ParticleMeasure,
    depth: int,
    j0: int = 0,
    *,
    region: Optional[tuple[Point, float]] = None,
    compute_betas: bool = True,
    jobs: int = 1,
    prune_fraction: float = PRUNE_FRACTION,
    min_atoms: int = MIN_CUBE_ATOMS,
) -> CubeTree:
    """
    Builds generations j0..j0+depth of parabolic dyadic cubes over the atoms
    (optionally only those in the box ball `region`).

    Every atom lies in exactly one cube per generation and each cube lies in
    its parent. A cube is retained when it has `min_atoms` atoms, at least
    `prune_fraction` of the generation's median mass, and a retained parent.
    beta and bbeta of retained cubes are computed on B(z_Q, 3 * side).
    """
    if depth < 1:
        raise InvalidArgumentError(f"depth must be >= 1, got {depth}")
    if mu.size == 0:
        raise EmptyMeasureError("measure has no atoms")
    pool = np.arange(mu.size)
    if region is not None:
        pool = pool[distances(mu.coords, region[0], Metric.BOX) <= region[1]]
        if pool.size == 0:
            raise EmptyMeasureError("region holds no atoms")
    coords = mu.coords
    cubes: list[Cube] = []
    generations: dict[int, list[int]] = {}
    parent_of_key: dict[tuple[int, ...], int] = {}

    for j in range(j0, j0 + depth + 1):
        keys = _cube_keys(coords[pool], j)
        unique, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(unique.shape[0] + 1))
        ids, masses = [], []
        current: dict[tuple[int, ...], int] = {}
        for g, key in enumerate(unique):
            idx = pool[order[bounds[g] : bounds[g + 1]]]
            key_t = tuple(int(k) for k in key)
            box_center = np.append((key[:-1] + 0.5) * 2.0**-j, (key[-1] + 0.5) * 4.0**-j)
            center_idx = idx[np.argmin(distances(coords[idx], Point.from_coords(box_center)))]
            parent = None
            if j > j0:
                parent_key = tuple(int(k) for k in np.append(key[:-1] // 2, key[-1] // 4))
                parent = parent_of_key[parent_key]
            cube = Cube(j, key_t, idx, float(mu.weights[idx].sum()), Point.from_coords(coords[center_idx]), parent)
            cubes.append(cube)
            ids.append(len(cubes) - 1)
            masses.append(cube.mass)
            current[key_t] = len(cubes) - 1
            if parent is not None:
                cubes[parent].children.append(len(cubes) - 1)
        median = float(np.median(masses))
        for i in ids:
            c = cubes[i]
            parent_ok = c.parent is None or cubes[c.parent].retained
            c.retained = parent_ok and c.indices.shape[0] >= min_atoms and c.mass >= prune_fraction * median
        generations[j] = ids
        parent_of_key = current

    tree = CubeTree(mu, j0, depth, cubes, generations)
    if compute_betas:
        kept = [c for c in cubes if c.retained]

        def work(cube: Cube) -> BetaPair:
            return beta_numbers(mu, cube.center, 3.0 * cube.side)

        for cube, pair in zip(kept, parallel_map(work, kept, jobs)):
            cube.beta, cube.bbeta = pair.beta, pair.bbeta
    logger.info("cube tree: %d cubes over generations %d..%d", len(cubes), j0, j0 + depth)
    return tree


def _is_bad(cube: Cube, eta: float) -> bool:
    return cube.retained and cube.bbeta is not None and cube.bbeta > eta


def carleson_bwgl(tree: CubeTree, eta: float) -> float:
    """max over retained roots R of sum_{Q in R, bbeta(Q) > eta} mu(Q) / mu(R)."""
    if eta <= 0:
        raise InvalidArgumentError("eta must be positive")
    best = 0.0
    for root_id in tree.generations[tree.j0]:
        root = tree.cubes[root_id]
        if not root.retained or root.mass <= 0:
            continue
        bad = sum(tree.cubes[i].mass for i in tree.descendants(root_id) if _is_bad(tree.cubes[i], eta))
        best = max(best, bad / root.mass)
    return best


def bad_mass_profile(tree: CubeTree, eta: float) -> list[dict]:
    rows = []
    for j in sorted(tree.generations):
        cubes = [c for c in tree.cubes_at(j) if c.retained]
        total = sum(c.mass for c in cubes)
        bad = sum(c.mass for c in cubes if _is_bad(c, eta))
        rows.append({"generation": j, "bad_mass": bad, "retained_mass": total, "fraction": bad / total if total else 0.0})
    return rows


@dataclass(frozen=True)
class WCDResult:
    passed: bool
    theta: float
    worst_deviation: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "theta": self.theta,
            "worst_deviation": self.worst_deviation,
            "samples": self.samples,
        }


def _ball_pairs(mu: ParticleMeasure, support: np.ndarray, r: float, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    idx = rng.integers(0, support.shape[0], size=count)
    radii = r * (1.0 - rng.random(count))
    masses = np.array(
        [mu.weights[distances(mu.coords, Point.from_coords(support[i])) <= t].sum() for i, t in zip(idx, radii)]
    )
    return radii, masses


def wcd_probe(
    mu: ParticleMeasure,
    x: Point,
    r: float,
    eps: float,
    *,
    h: Optional[float] = None,
    samples: int = WCD_SAMPLES,
    seed: int = 0,
) -> WCDResult:
    """
    Sufficient check that (x, r) is a good pair for the weak constant density
    condition: the candidate sigma = mu / Theta, with Theta fitted on one set
    of sampled balls B(y, t), y in supp & B(x, r), t in (0, r], must satisfy
    |sigma(B(y, t)) - t^h| <= eps r^h on a fresh set. Failure certifies nothing.
    """
    if r <= 0 or eps <= 0:
        raise InvalidArgumentError("r and eps must be positive")
    h = float(mu.n + 1 if h is None else h)
    support = mu.coords[distances(mu.coords, x) <= r]
    if support.shape[0] == 0:
        raise EmptyMeasureError("no atoms in B(x, r)")
    rng = np.random.default_rng(derive_seed(seed, "wcd"))
    radii, masses = _ball_pairs(mu, support, r, samples, rng)
    theta = float(masses.sum() / np.sum(radii**h))
    radii, masses = _ball_pairs(mu, support, r, samples, rng)
    worst = float(np.max(np.abs(masses / theta - radii**h)) / r**h) if theta > 0 else float("inf")
    return WCDResult(worst <= eps, theta, worst, samples)


def r_operator(mu: ParticleMeasure, z: Point, r: float, s: float) -> VectorEstimate:
    """sum over atoms y with r < |z - y| <= s of w |z_H - y_H|^2 (z_H - y_H) / |z - y|^{n+4}."""
    if r <= 0 or s <= 0:
        raise InvalidArgumentError("radii must be positive")
    if r > s:
        raise InvalidArgumentError(f"need r <= s, got r={r}, s={s}")
    n = mu.n
    diff = z.h - mu.coords[:, :-1]
    d = distances(mu.coords, z)
    mask = (d > r) & (d <= s)
    values = np.zeros((mu.size, n))
    dm = diff[mask]
    values[mask] = np.sum(dm * dm, axis=1)[:, None] * dm / d[mask][:, None] ** (n + 4)
    return mu.integrate_vector(values)


def touching_point_bound(mu: ParticleMeasure, z: Point, r: float, s: float) -> float:
    """sup over atoms x in B(z, r) of |<(x_H - z_H) / r, R_{r,s} mu(z)>|."""
    vec = r_operator(mu, z, r, s).values
    near = mu.coords[distances(mu.coords, z) <= r]
    if near.shape[0] == 0:
        raise EmptyMeasureError("no atoms in B(z, r)")
    return float(np.max(np.abs((near[:, :-1] - z.h) / r @ vec)))


def _square_function_grid(
    mu: ParticleMeasure, x: Point, R: float, q: float, min_atoms: int
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Atom distances to x and the descending log grid R 10^{-k/32} down to the resolution radius."""
    if q <= 0 or R <= 0:
        raise InvalidArgumentError("q and R must be positive")
    dist = distances(mu.coords, x)
    d = np.sort(dist)
    if d.shape[0] < min_atoms:
        raise EmptyMeasureError(f"fewer than {min_atoms} atoms")
    r_min = d[min_atoms - 1]
    if r_min >= R:
        return None
    steps = int(np.floor(SQUARE_FUNCTION_NODES_PER_DECADE * np.log10(R / r_min)))
    if steps < 1:
        return None
    return dist, R * 10.0 ** (-np.arange(steps + 1) / SQUARE_FUNCTION_NODES_PER_DECADE)


def _log_trapezoid(g: np.ndarray, radii: np.ndarray) -> float:
    return float(np.trapezoid(g[::-1], np.log(radii[::-1])))


def density_square_function(
    mu: ParticleMeasure,
    x: Point,
    R: float,
    q: float,
    *,
    h: Optional[float] = None,
    min_atoms: int = MIN_RESOLUTION_ATOMS,
) -> float:
    """
    int_{r_min}^R |mu(B(x,r))/r^h - mu(B(x,2r))/(2r)^h|^q dr/r on a log grid of
    32 nodes per decade; r_min is the radius holding `min_atoms` atoms.
    """
    grid = _square_function_grid(mu, x, R, q, min_atoms)
    if grid is None:
        return 0.0
    dist, radii = grid
    h = float(mu.n + 1 if h is None else h)
    small = np.array([mu.weights[dist <= r].sum() for r in radii]) / radii**h
    large = np.array([mu.weights[dist <= 2.0 * r].sum() for r in radii]) / (2.0 * radii) ** h
    return _log_trapezoid(np.abs(small - large) ** q, radii)


def square_function_noise_floor(
    mu: ParticleMeasure,
    x: Point,
    R: float,
    q: float,
    *,
    h: Optional[float] = None,
    min_atoms: int = MIN_RESOLUTION_ATOMS,
) -> float:
    """
    The same integral with the integrand replaced by the standard error of the
    density difference (errors of the two balls added in quadrature). A value
    of density_square_function below a few times this is sampling noise.
    """
    grid = _square_function_grid(mu, x, R, q, min_atoms)
    if grid is None:
        return 0.0
    dist, radii = grid
    h = float(mu.n + 1 if h is None else h)
    se_small = np.array([mu.integrate((dist <= r).astype(float)).std_error for r in radii]) / radii**h
    se_large = np.array([mu.integrate((dist <= 2.0 * r).astype(float)).std_error for r in radii]) / (2.0 * radii) ** h
    return _log_trapezoid(np.hypot(se_small, se_large) ** q, radii)


def bilateral_probe(mu: ParticleMeasure, x: Point, r: float, delta: float) -> dict:
    """beta on the enlarged ball B(x, r/delta) next to bbeta on B(x, r)."""
    if not 0 < delta <= 1:
        raise InvalidArgumentError("delta must lie in (0, 1]")
    outer = beta_numbers(mu, x, r / delta)
    inner = beta_numbers(mu, x, r)
    return {"delta": delta, "beta_outer": outer.beta, "small_outer": outer.beta <= delta**2, "bbeta_inner": inner.bbeta}


def tangency_probe(mu: ParticleMeasure, x: Point, radii: Sequence[float]) -> list[float]:
    """Angle (radians) between best beta planes of consecutive radii."""
    normals = [beta_numbers(mu, x, r).best_plane.unit_normal for r in radii]
    return [float(np.arccos(min(1.0, abs(float(a @ b))))) for a, b in zip(normals, normals[1:])]
