"""
Area of Koranyi balls centred on the quadric graph t = <y, D y>: the polar-type
coordinates (rho, theta, v), the quartic H(rho, theta, v) = r^4 describing the
ball, its series solution, direct quadrature of the area, and the constants of
the small-radius expansion area = c r^{n+1} + zeta r^{n+2} + e r^{n+3} + ...
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import optimize, special

from parabolic.config import (
    MAX_FIT_CONDITION,
    MIN_FIT_OCTAVES,
    MIN_FIT_RADII,
    MONOTONE_CHECK_POINTS,
    QUAD_RHO_NODES,
    QUAD_THETA_NODES,
    QUAD_V_NODES_3D,
    QUAD_V_SAMPLES,
    ROOT_RTOL,
)
from parabolic.estimators import ball_mass
from parabolic.exceptions import IllConditionedError, InvalidArgumentError, RadiusOutOfRangeError
from parabolic.geometry import Point
from parabolic.models import QuadricGraph
from parabolic.particles import MassEstimate, WindowProposal, sample
from parabolic.utils import orthonormal_complement, sphere_area, uniform_sphere

logger = logging.getLogger(__name__)


class QuadricFrame:
    """Point x of the horizontal space with its normal data for the graph of y -> <y, D y>."""

    def __init__(self, D, x):
        D = np.atleast_2d(np.array(D, dtype=float))
        x = np.array(x, dtype=float).reshape(-1)
        if D.shape[0] != D.shape[1] or not np.allclose(D, D.T, atol=1e-12):
            raise InvalidArgumentError("D must be symmetric")
        if D.shape[0] < 2:
            raise InvalidArgumentError("the quadric expansion needs n >= 2")
        if x.shape[0] != D.shape[0]:
            raise InvalidArgumentError("x must have length n")
        Dx = D @ x
        norm = float(np.linalg.norm(Dx))
        if norm <= 1e-14 * max(1.0, float(np.abs(D).max()) * float(np.linalg.norm(x))):
            raise InvalidArgumentError("x lies in Ker D")
        self.D = D
        self.x = x
        self.normal = Dx / norm
        self.c = 2.0 * norm
        self.alpha = float(self.normal @ D @ self.normal)

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @cached_property
    def perp_basis(self) -> np.ndarray:
        return orthonormal_complement(self.normal)

    def beta_n(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v) @ (self.D @ self.normal)

    def gamma(self, v: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(v)
        out = np.einsum("ij,jk,ik->i", v, self.D, v)
        return out if out.shape[0] > 1 else out[0]

    def G(self, w: np.ndarray) -> np.ndarray:
        """|w|^4 + (c <n, w> + <w, D w>)^2: fourth power of the Koranyi distance along the graph."""
        w = np.atleast_2d(w)
        ww = np.sum(w * w, axis=1)
        lift = self.c * (w @ self.normal) + np.einsum("ij,jk,ik->i", w, self.D, w)
        return ww**2 + lift**2

    def P(self, rho, theta, v: np.ndarray) -> np.ndarray:
        """Coordinate map (sin(theta)/c) rho^2 n + cos(theta) rho v."""
        rho = np.asarray(rho, dtype=float)[..., None]
        return np.sin(theta) / self.c * rho**2 * self.normal + np.cos(theta) * rho * np.asarray(v)

    @property
    def center(self) -> Point:
        return Point(self.x, float(self.x @ self.D @ self.x))

    @property
    def critical_distance(self) -> float:
        """Koranyi distance from the centre to the graph points over Ker D."""
        eigvals, eigvecs = np.linalg.eigh(self.D)
        kernel = eigvecs[:, np.abs(eigvals) <= 1e-12 * np.abs(eigvals).max()]
        off = self.x - kernel @ (kernel.T @ self.x)
        height = float(self.x @ self.D @ self.x)
        return float((np.sum(off * off) ** 2 + height**2) ** 0.25)

    def v_nodes(self, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """
        Nodes and weights for integrating over the unit sphere of n-perp:
        the two antipodal points for n=2, a uniform angular grid for n=3,
        seeded Monte-Carlo directions otherwise.
        """
        basis = self.perp_basis
        if self.n == 2:
            e = basis[:, 0]
            return np.vstack([e, -e]), np.ones(2)
        if self.n == 3:
            phi = 2.0 * np.pi * np.arange(QUAD_V_NODES_3D) / QUAD_V_NODES_3D
            nodes = np.outer(np.cos(phi), basis[:, 0]) + np.outer(np.sin(phi), basis[:, 1])
            return nodes, np.full(QUAD_V_NODES_3D, 2.0 * np.pi / QUAD_V_NODES_3D)
        rng = np.random.default_rng(seed)
        coeffs = uniform_sphere(rng, QUAD_V_SAMPLES, self.n - 1)
        return coeffs @ basis.T, np.full(QUAD_V_SAMPLES, sphere_area(self.n - 2) / QUAD_V_SAMPLES)

    def to_dict(self) -> dict:
        return {"D": self.D.tolist(), "x": self.x.tolist(), "normal": self.normal.tolist(), "c": self.c}


@dataclass(frozen=True)
class HCoefficients:
    A: float
    B: float
    C: float
    D: float
    E: float

    def H(self, rho, c: float):
        rho = np.asarray(rho, dtype=float)
        return rho**4 * (self.A + rho * (self.B / c + rho * (self.C / c**2 + rho * (self.D / c**3 + rho * self.E / c**4))))

    def dH(self, rho, c: float):
        rho = np.asarray(rho, dtype=float)
        return rho**3 * (
            4 * self.A + rho * (5 * self.B / c + rho * (6 * self.C / c**2 + rho * (7 * self.D / c**3 + 8 * rho * self.E / c**4)))
        )


def _check_direction(frame: QuadricFrame, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != frame.n or abs(np.linalg.norm(v) - 1.0) > 1e-9 or abs(v @ frame.normal) > 1e-9:
        raise InvalidArgumentError("v must be a unit vector orthogonal to the normal")
    return v


def h_coefficients(frame: QuadricFrame, theta: float, v: np.ndarray) -> HCoefficients:
    """Coefficients of H(rho) = A rho^4 + B rho^5/c + C rho^6/c^2 + D rho^7/c^3 + E rho^8/c^4."""
    v = _check_direction(frame, v)
    s, co = np.sin(theta), np.cos(theta)
    a, b, g = frame.alpha, float(frame.beta_n(v)), float(frame.gamma(v))
    lift = s + co**2 * g
    return HCoefficients(
        A=co**4 + lift**2,
        B=4.0 * s * co * b * lift,
        C=s**2 * (co**2 * (2.0 + 4.0 * b**2 + 2.0 * g * a) + 2.0 * s * a),
        D=4.0 * a * b * s**3 * co,
        E=(1.0 + a**2) * s**4,
    )


def density_coefficients(frame: QuadricFrame, theta: float, v: np.ndarray) -> tuple[float, float]:
    """(A1, B2) with 2|D(x + P(rho, theta, v))| = c + A1 rho + (B2 / c) rho^2 + O(rho^3)."""
    v = _check_direction(frame, v)
    s, co = np.sin(theta), np.cos(theta)
    Dv = frame.D @ v
    perp = Dv - (Dv @ frame.normal) * frame.normal
    return 2.0 * co * float(frame.beta_n(v)), 2.0 * (s * frame.alpha + co**2 * float(perp @ perp))


def density(frame: QuadricFrame, rho, theta: float, v: np.ndarray) -> np.ndarray:
    """2 |D (x + P(rho, theta, v))|: the coarea weight along the graph."""
    return 2.0 * np.linalg.norm((frame.x + frame.P(rho, theta, v)) @ frame.D, axis=-1)


def radius_solution(frame: QuadricFrame, theta: float, v: np.ndarray, r: float) -> float:
    """Third-order series root of H(rho, theta, v) = r^4."""
    k = h_coefficients(frame, theta, v)
    A, B, C = k.A, k.B / frame.c, k.C / frame.c**2
    return (
        r / A**0.25
        - B * r**2 / (4.0 * A**1.5)
        + (7.0 * B**2 / (32.0 * A**2.75) - C / (4.0 * A**1.75)) * r**3
    )


def _exact_root(k: HCoefficients, c: float, r: float) -> float:
    target = r**4
    hi = 2.0 * r / k.A**0.25
    for _ in range(60):
        if k.H(hi, c) > target:
            break
        hi *= 2.0
    else:
        raise RadiusOutOfRangeError(r, "no bracket for H = r^4")
    grid = np.linspace(0.0, hi, MONOTONE_CHECK_POINTS)
    if np.any(np.diff(k.H(grid, c)) <= 0):
        raise RadiusOutOfRangeError(r, "H is not monotone on the bracket")
    return optimize.brentq(lambda rho: float(k.H(rho, c)) - target, 0.0, hi, xtol=ROOT_RTOL * r, rtol=4 * np.finfo(float).eps)


def exact_radius(frame: QuadricFrame, theta: float, v: np.ndarray, r: float) -> float:
    """Root of H(rho, theta, v) = r^4 by bracketed bisection."""
    if r <= 0:
        raise InvalidArgumentError("r must be positive")
    return _exact_root(h_coefficients(frame, theta, v), frame.c, r)


def _theta_rule() -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(QUAD_THETA_NODES)
    return 0.5 * np.pi * x, 0.5 * np.pi * w


def _jacobian(frame: QuadricFrame, rho, theta: float):
    return rho**frame.n * np.cos(theta) ** (frame.n - 2) * (1.0 + np.sin(theta) ** 2) / frame.c


def area_direct(frame: QuadricFrame, r: float, *, seed: int = 0) -> float:
    """
    Surface measure of the Koranyi ball B(X, r), X = (x, <x, D x>), by quadrature
    in (theta, v) and Gauss-Legendre in rho up to the exact root.
    """
    if not (np.isfinite(r) and r > 0):
        raise InvalidArgumentError("r must be positive")
    if r >= frame.critical_distance:
        raise RadiusOutOfRangeError(r, f"critical set at distance {frame.critical_distance:.6g}")
    thetas, theta_w = _theta_rule()
    v_nodes, v_w = frame.v_nodes(seed)
    rx, rw = np.polynomial.legendre.leggauss(QUAD_RHO_NODES)
    total = 0.0
    for theta, tw in zip(thetas, theta_w):
        for v, vw in zip(v_nodes, v_w):
            root = _exact_root(h_coefficients(frame, theta, v), frame.c, r)
            rho = 0.5 * root * (rx + 1.0)
            xi = _jacobian(frame, rho, theta) * density(frame, rho, theta, v)
            total += tw * vw * 0.5 * root * float(rw @ xi)
    return total


def area_monte_carlo(frame: QuadricFrame, r: float, N: int, seed: int) -> MassEstimate:
    """Coarea-weighted particle estimate of the same ball area."""
    center = frame.center
    cloud = sample(QuadricGraph(frame.D), N, seed, proposal=WindowProposal(center, r))
    return ball_mass(cloud, center, r)


def closed_form_kernel_integral(k: int, alpha: float) -> float:
    """int_R x^k / (1 + x^2)^alpha dx."""
    if k < 0:
        raise InvalidArgumentError("k must be >= 0")
    if alpha <= (k + 1) / 2:
        raise InvalidArgumentError(f"integral diverges: need alpha > {(k + 1) / 2}, got {alpha}")
    if k % 2:
        return 0.0
    return float(special.gamma((k + 1) / 2) * special.gamma(alpha - (k + 1) / 2) / special.gamma(alpha))


@dataclass(frozen=True)
class ExpansionConstants:
    c_n: float
    e: float
    bracket: float
    C_n: float
    sphere_area: float

    def to_dict(self) -> dict:
        return {"c_n": self.c_n, "e": self.e, "bracket": self.bracket, "C_n": self.C_n, "sphere_area": self.sphere_area}


def first_order_constant(n: int) -> float:
    """Limit of area / r^{n+1}; 2 for n = 1 (graphs of lines in P^1)."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if n == 1:
        return 2.0
    return float(
        np.sqrt(np.pi) * special.gamma((n - 1) / 4) * sphere_area(n - 2) / ((n + 1) * special.gamma((n + 1) / 4))
    )


def second_order_factor(n: int) -> float:
    return float(np.sqrt(np.pi) * special.gamma((n + 1) / 4) / ((n + 3) / 4 * special.gamma((n + 3) / 4)))


def uniformity_bracket(D: np.ndarray, normal: np.ndarray) -> float:
    n = D.shape[0]
    Dn = D @ normal
    alpha = float(normal @ Dn)
    return (
        (float(np.trace(D @ D)) - 2.0 * float(Dn @ Dn) + alpha**2) / (4.0 * (n - 1))
        - 0.25
        - (float(np.trace(D)) - alpha) ** 2 / (8.0 * (n - 1))
    )


def expansion_constants(frame: QuadricFrame) -> ExpansionConstants:
    n = frame.n
    area = sphere_area(n - 2)
    bracket = uniformity_bracket(frame.D, frame.normal)
    C_n = second_order_factor(n)
    return ExpansionConstants(first_order_constant(n), C_n * area / frame.c**2 * bracket, bracket, C_n, area)


def expansion_e_quadrature(frame: QuadricFrame, *, seed: int = 0) -> float:
    """The r^{n+3} coefficient by direct (theta, v) quadrature of its kernel."""
    n, c = frame.n, frame.c
    thetas, theta_w = _theta_rule()
    v_nodes, v_w = frame.v_nodes(seed)
    total = 0.0
    for theta, tw in zip(thetas, theta_w):
        weight = np.cos(theta) ** (n - 2) * (1.0 + np.sin(theta) ** 2)
        for v, vw in zip(v_nodes, v_w):
            k = h_coefficients(frame, theta, v)
            a1, b2 = density_coefficients(frame, theta, v)
            kernel = (7 + n) / 32 * k.B**2 / k.A**2 - k.C / (4 * k.A) - a1 * k.B / (4 * k.A) + b2 / (n + 3)
            total += tw * vw * weight * kernel / (c**2 * k.A ** ((n + 3) / 4))
    return total


def a_lower_bound(frame: QuadricFrame, theta_nodes: int = 257) -> float:
    """min of A(theta, v) over a theta grid and the v nodes."""
    v_nodes, _ = frame.v_nodes()
    thetas = np.linspace(-np.pi / 2, np.pi / 2, theta_nodes)
    return min(h_coefficients(frame, th, v).A for th in thetas for v in v_nodes)


@dataclass(frozen=True)
class FitResult:
    c_hat: float
    zeta_hat: float
    e_hat: float
    std_errors: tuple[float, float, float]
    condition: float
    coefficients: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "zeta_hat": self.zeta_hat,
            "e_hat": self.e_hat,
            "std_errors": list(self.std_errors),
            "condition": self.condition,
            "coefficients": list(self.coefficients),
        }


def _lstsq(r: np.ndarray, y: np.ndarray, w: np.ndarray, powers: Sequence[int]):
    scale = r.max()
    X = np.column_stack([(r / scale) ** p for p in powers]) * w[:, None]
    cond = float(np.linalg.cond(X))
    coef, _, _, _ = np.linalg.lstsq(X, y * w, rcond=None)
    resid = X @ coef - y * w
    dof = X.shape[0] - X.shape[1]
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.pinv(X.T @ X)
    unscale = np.array([scale ** -p for p in powers])
    return coef * unscale, np.sqrt(np.clip(np.diag(cov), 0.0, None)) * unscale, cond


def fit_expansion(
    areas: Sequence[tuple[float, float]],
    n: int,
    *,
    extra_orders: Sequence[int] = (),
    weights: Sequence[float] | None = None,
) -> FitResult:
    """
    Least squares of area / r^{n+1} against {1, r, r^2} (plus `extra_orders`).

    Standard errors combine the residual-based statistical error with the
    change of each coefficient when the next unused power is added.
    """
    data = np.asarray(areas, dtype=float)
    if data.ndim != 2 or data.shape[0] < MIN_FIT_RADII:
        raise IllConditionedError(f"need at least {MIN_FIT_RADII} radii")
    r, area = data[:, 0], data[:, 1]
    if np.any(r <= 0):
        raise InvalidArgumentError("radii must be positive")
    if np.log2(r.max() / r.min()) < MIN_FIT_OCTAVES:
        raise IllConditionedError(f"radii must span at least {MIN_FIT_OCTAVES:g} octaves")
    y = area / r ** (n + 1)
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    powers = sorted({0, 1, 2, *extra_orders})
    coef, stat, cond = _lstsq(r, y, w, powers)
    if cond > MAX_FIT_CONDITION:
        raise IllConditionedError(f"design condition number {cond:.3g}")
    truncation = np.zeros(3)
    nxt = next(p for p in range(3, 64) if p not in powers)
    if r.shape[0] > len(powers) + 1:
        wider, _, _ = _lstsq(r, y, w, powers + [nxt])
        truncation = np.abs(wider[:3] - coef[:3])
    se = np.sqrt(stat[:3] ** 2 + truncation**2)
    return FitResult(float(coef[0]), float(coef[1]), float(coef[2]), tuple(float(s) for s in se), cond, tuple(coef))


def richardson_extrapolate(values: Sequence[float], ratio: float, powers: Sequence[int]) -> list[float]:
    """
    Successive Richardson extrapolants of values computed at h, h/ratio, h/ratio^2, ...
    eliminating error terms h^p for p in `powers` in turn. Returns the last
    entry of each elimination level.
    """
    table = [np.asarray(values, dtype=float)]
    for p in powers:
        prev = table[-1]
        if prev.shape[0] < 2:
            break
        factor = ratio**p
        table.append((factor * prev[1:] - prev[:-1]) / (factor - 1.0))
    return [float(level[-1]) for level in table]


def uniformity_residual(D, p) -> float:
    """The bracket of the r^{n+3} coefficient at the normal Dp/|Dp|; uniform measures need it to vanish."""
    D = np.atleast_2d(np.array(D, dtype=float))
    p = np.asarray(p, dtype=float).reshape(-1)
    Dp = D @ p
    norm = float(np.linalg.norm(Dp))
    if norm <= 1e-14 * max(1.0, float(np.abs(D).max()) * float(np.linalg.norm(p))):
        raise InvalidArgumentError("p lies in Ker D")
    if D.shape[0] < 2:
        raise InvalidArgumentError("need n >= 2")
    return uniformity_bracket(D, Dp / norm)


def simplified_uniformity_form(D, p) -> float:
    """
    -4<n, D^2 n> + <n, D n>^2 + 3(lam1 + lam2)<n, D n> - 3 lam1 lam2 at n = Dp/|Dp|,
    for D with exactly two distinct eigenvalues lam1, lam2.
    """
    D = np.atleast_2d(np.array(D, dtype=float))
    eigvals = np.linalg.eigvalsh(D)
    groups = [eigvals[0]]
    for lam in eigvals[1:]:
        if abs(lam - groups[-1]) > 1e-9 * max(1.0, abs(lam)):
            groups.append(lam)
    if len(groups) != 2:
        raise InvalidArgumentError(f"D must have exactly two distinct eigenvalues, found {len(groups)}")
    lam1, lam2 = float(groups[0]), float(groups[1])
    Dp = D @ np.asarray(p, dtype=float)
    normal = Dp / np.linalg.norm(Dp)
    Dn = D @ normal
    a = float(normal @ Dn)
    return -4.0 * float(Dn @ Dn) + a**2 + 3.0 * (lam1 + lam2) * a - 3.0 * lam1 * lam2


def two_eigenvalue_form(lam1: float, lam2: float, v1_sq: float, v2_sq: float) -> float:
    """Closed form of the reduced form when p = v1 + v2 splits over two eigenspaces."""
    a, b = lam1**2 * v1_sq, lam2**2 * v2_sq
    return -a * b * (lam1 - lam2) ** 2 / (a + b) ** 2


def line_graph_area(slope: float, r: float) -> float:
    """Surface measure of the Koranyi ball of radius r at 0 on the line graph t = slope * y in P^1."""
    m2 = slope * slope
    y2 = 2.0 * r**4 / (m2 + np.sqrt(m2 * m2 + 4.0 * r**4))
    return 2.0 * abs(slope) * float(np.sqrt(y2))
