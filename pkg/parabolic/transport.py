"""
The F_K metric between particle measures, by linear programming over
1-Lipschitz test functions, and the distance to flat measures built on it.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, sparse
from scipy.spatial import cKDTree
from scipy.stats import qmc

from parabolic.config import (
    FLAT_COARSE_DIRECTIONS,
    FLAT_PLANE_POINTS,
    FLAT_REFINE_STEPS,
    FLAT_SCALE_BRACKET,
    KNN_K,
    MAX_LP_GRID,
)
from parabolic.exceptions import EmptyMeasureError, InternalError, InvalidArgumentError
from parabolic.geometry import Metric, Point, VerticalHyperplane, distances, pair_distances
from parabolic.models import flat_normalization
from parabolic.particles import ParticleMeasure
from parabolic.utils import fibonacci_directions, orthonormal_complement

logger = logging.getLogger(__name__)


def _embed(coords: np.ndarray, center: Point, radius: float) -> np.ndarray:
    """Euclidean proxy coordinates for neighbour search, invariant under T_{center, radius}."""
    dt = coords[:, -1] - center.t
    return np.column_stack([(coords[:, :-1] - center.h) / radius, np.sign(dt) * np.sqrt(np.abs(dt)) / radius])


def lp_grid(*measures: ParticleMeasure, center: Point, radius: float, max_nodes: int = MAX_LP_GRID) -> np.ndarray:
    """Shared node set: distinct atom locations in the ball, thinned evenly past `max_nodes`."""
    parts = [m.coords[distances(m.coords, center) <= radius] for m in measures]
    nodes = np.unique(np.vstack(parts), axis=0) if parts else np.zeros((0, center.n + 1))
    if nodes.shape[0] > max_nodes:
        idx = np.linspace(0, nodes.shape[0] - 1, max_nodes).round().astype(int)
        nodes = nodes[np.unique(idx)]
    return nodes


def _aggregate(measure: ParticleMeasure, tree: cKDTree, center: Point, radius: float, size: int) -> np.ndarray:
    inside = distances(measure.coords, center) <= radius
    if not inside.any():
        return np.zeros(size)
    _, nearest = tree.query(_embed(measure.coords[inside], center, radius))
    return np.bincount(nearest, weights=measure.weights[inside], minlength=size)


def _lipschitz_constraints(nodes: np.ndarray, tree: cKDTree, emb: np.ndarray, k: int, metric: Metric):
    m = nodes.shape[0]
    kk = min(k + 1, m)
    _, nbrs = tree.query(emb, k=kk)
    nbrs = np.asarray(nbrs).reshape(m, kk)
    i = np.repeat(np.arange(m), kk)
    j = nbrs.reshape(-1)
    distinct = i != j
    pairs = np.unique(np.sort(np.column_stack([i[distinct], j[distinct]]), axis=1), axis=0)
    d = pair_distances(nodes[pairs[:, 0]], nodes[pairs[:, 1]], metric)
    rows = np.arange(pairs.shape[0])
    upper = sparse.csr_matrix(
        (np.concatenate([np.ones(len(rows)), -np.ones(len(rows))]),
         (np.concatenate([rows, rows]), np.concatenate([pairs[:, 0], pairs[:, 1]]))),
        shape=(len(rows), m),
    )
    return sparse.vstack([upper, -upper]).tocsr(), np.concatenate([d, d])


def _solve(objective: np.ndarray, A_ub, b_ub, caps: np.ndarray) -> float:
    res = optimize.linprog(
        -objective,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=np.column_stack([np.zeros_like(caps), caps]),
        method="highs",
    )
    if res.status != 0:
        raise InternalError(f"Lipschitz LP failed: {res.message}")
    return max(0.0, -float(res.fun))


def fk_distance(
    phi: ParticleMeasure,
    psi: ParticleMeasure,
    center: Point,
    radius: float,
    *,
    grid: Optional[np.ndarray] = None,
    metric: Metric = Metric.KORANYI,
    k: int = KNN_K,
) -> float:
    """
    F_K(phi, psi) on the closed ball K = B(center, radius).

    Test functions live on a node grid in K (the atoms of both measures, or
    `grid` when given; atoms are moved to their nearest node). They satisfy
    0 <= f(g) <= radius - d(g, center) and |f(g_i) - f(g_j)| <= d(g_i, g_j) on
    the k-nearest-neighbour graph. The larger of the two signed optima is
    returned, so the value is symmetric. Passing one `grid` to several calls
    makes them share a feasible set, and then the triangle inequality holds.
    """
    if not (np.isfinite(radius) and radius > 0):
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    nodes = lp_grid(phi, psi, center=center, radius=radius) if grid is None else np.asarray(grid, dtype=float)
    nodes = nodes[distances(nodes, center) <= radius] if nodes.size else nodes
    if nodes.shape[0] == 0:
        raise EmptyMeasureError("no atoms in K")
    emb = _embed(nodes, center, radius)
    tree = cKDTree(emb)
    diff = _aggregate(phi, tree, center, radius, nodes.shape[0]) - _aggregate(psi, tree, center, radius, nodes.shape[0])
    if not np.any(diff):
        return 0.0
    caps = np.clip(radius - distances(nodes, center, metric), 0.0, None)
    if nodes.shape[0] == 1:
        return float(abs(diff[0]) * caps[0])
    A_ub, b_ub = _lipschitz_constraints(nodes, tree, emb, k, metric)
    if A_ub.shape[0] == 0:
        A_ub = b_ub = None
    logger.debug("F_K LP: %d nodes, %d constraints", nodes.shape[0], 0 if b_ub is None else len(b_ub))
    return max(_solve(diff, A_ub, b_ub, caps), _solve(-diff, A_ub, b_ub, caps))


@dataclass(frozen=True)
class FlatDistanceResult:
    value: float
    coarse_value: float
    plane: VerticalHyperplane
    scale: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "coarse_value": self.coarse_value,
            "plane": self.plane.to_dict(),
            "scale": self.scale,
        }


def flat_cloud(plane: VerticalHyperplane, scale: float, center: Point, radius: float, points: int) -> ParticleMeasure:
    """scale * (flat measure on `plane`) restricted to the Koranyi ball, as Sobol points."""
    n = plane.n
    basis = plane.basis()
    a_center = basis.T @ (center.h - plane.base_point())
    sobol = qmc.Sobol(d=n, scramble=False).random_base2(int(np.ceil(np.log2(points))))
    half = np.array([radius] * (n - 1) + [radius**2])
    params = np.append(a_center, center.t) + half * (2.0 * sobol - 1.0)
    coords = np.column_stack([plane.base_point() + params[:, :-1] @ basis.T, params[:, -1]])
    weight = scale * np.prod(2.0 * half) / params.shape[0]
    inside = distances(coords, center) <= radius
    return ParticleMeasure(
        coords=coords[inside],
        weights=np.full(int(inside.sum()), weight),
        strata=np.zeros(int(inside.sum()), dtype=np.int64),
        counts=(0,),
    )


def flat_distance(
    phi: ParticleMeasure,
    x: Point,
    r: float,
    h: int,
    *,
    directions: int = FLAT_COARSE_DIRECTIONS,
    refine_steps: int = FLAT_REFINE_STEPS,
    plane_points: int = FLAT_PLANE_POINTS,
    max_nodes: int = 600,
) -> FlatDistanceResult:
    """
    d_{x,r}(phi, flat measures of dimension h) = inf over vertical hyperplanes V and
    lam > 0 of F_{x,r}(phi, lam * flat(V)) / r^{h+1}.

    Normals through x are scanned on a coarse grid with lam fixed at the mass
    ratio; the best one is refined by compass search in (u, c) and then by a
    bounded scalar search in lam. The reported value never exceeds the coarse one.
    """
    n = phi.n
    if h != n + 1:
        raise InvalidArgumentError(f"only codimension-one flats are supported: need h = {n + 1}, got {h}")
    if not (np.isfinite(r) and r > 0):
        raise InvalidArgumentError(f"radius must be positive, got {r}")
    inside = distances(phi.coords, x) <= r
    if not inside.any():
        raise EmptyMeasureError("no atoms of phi in the ball")
    phi_k = phi.restrict(inside)
    phi_nodes = lp_grid(phi_k, center=x, radius=r, max_nodes=max_nodes)
    lam0 = float(phi_k.weights.sum()) * flat_normalization(n) / r ** (n + 1)
    lam0 = max(lam0, 1e-300)

    def cost(plane: VerticalHyperplane, lam: float) -> float:
        flat = flat_cloud(plane, lam, x, r, plane_points)
        grid = np.vstack([phi_nodes, flat.coords])
        return fk_distance(phi_k, flat, x, r, grid=grid)

    candidates = [VerticalHyperplane.through(x, u) for u in fibonacci_directions(n, directions)]
    coarse = [cost(plane, lam0) for plane in candidates]
    best_idx = int(np.argmin(coarse))
    best_plane, best = candidates[best_idx], coarse[best_idx]
    coarse_best = best

    u, c = best_plane.unit_normal, best_plane.offset
    step = np.pi / max(directions, 2)
    for _ in range(refine_steps):
        improved = False
        moves = [(np.cos(step) * u + s * np.sin(step) * e, c) for e in orthonormal_complement(u).T for s in (1.0, -1.0)]
        moves += [(u, c + s * step * r) for s in (1.0, -1.0)]
        for cand_u, cand_c in moves:
            plane = VerticalHyperplane(cand_u / np.linalg.norm(cand_u), cand_c)
            value = cost(plane, lam0)
            if value < best:
                best_plane, best, improved = plane, value, True
                u, c = plane.unit_normal, plane.offset
                break
        if not improved:
            step /= 2
    logger.debug("flat_distance coarse=%.6g refined plane cost=%.6g", coarse_best, best)

    res = optimize.minimize_scalar(
        lambda lam: cost(best_plane, lam),
        bounds=(lam0 / FLAT_SCALE_BRACKET, lam0 * FLAT_SCALE_BRACKET),
        method="bounded",
        options={"xatol": 1e-2 * lam0, "maxiter": 12},
    )
    scale = lam0
    if res.fun < best:
        best, scale = float(res.fun), float(res.x)
    norm = r ** (h + 1)
    return FlatDistanceResult(best / norm, coarse_best / norm, best_plane, scale)
