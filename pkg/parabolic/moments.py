"""
Norm polarization, Gaussian-weighted moments, the barycenter curves b(s), Q(s),
T(s), the flatness functional and expansion residuals.

Every integral of one call is taken over the same cloud, so identities between
moments hold with correlated (small) Monte-Carlo error.
"""

import logging
from dataclasses import dataclass, field
from itertools import product
from math import factorial
from typing import Optional, Sequence

import numpy as np
from scipy import special

from parabolic.exceptions import DimensionMismatchError, InvalidArgumentError
from parabolic.geometry import Point
from parabolic.particles import MassEstimate, ParticleMeasure, VectorEstimate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolarizationParts:
    V: float
    L: float
    Q: float
    T: float


def koranyi_norm(coords: np.ndarray) -> np.ndarray:
    hh = np.sum(coords[..., :-1] ** 2, axis=-1)
    return np.sqrt(np.sqrt(hh * hh + coords[..., -1] ** 2))


def polarization_arrays(u: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(V, L, Q, T) for broadcastable coordinate arrays u and z."""
    uh, ut = u[..., :-1], u[..., -1]
    zh, zt = z[..., :-1], z[..., -1]
    uu = np.sum(uh * uh, axis=-1)
    zz = np.sum(zh * zh, axis=-1)
    uz = np.sum(uh * zh, axis=-1)
    L = 4.0 * zz * uz
    Q = 2.0 * zt * ut - 4.0 * uz**2 - 2.0 * zz * uu
    T = 4.0 * uu * uz
    V = 0.5 * (koranyi_norm(z) ** 4 + koranyi_norm(u) ** 4 - koranyi_norm(z - u) ** 4)
    return V, L, Q, T


def polarization(u: Point, z: Point) -> PolarizationParts:
    if u.n != z.n:
        raise DimensionMismatchError(u.n, z.n)
    V, L, Q, T = polarization_arrays(u.coords, z.coords)
    return PolarizationParts(float(V), float(L), float(Q), float(T))


def polarization_bounds(u: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Upper bounds for |V|, |L|, |Q|, |T| in terms of the Koranyi norms."""
    nu, nz = koranyi_norm(u), koranyi_norm(z)
    return (
        2.0 * nu * nz * (nu + nz) ** 2,
        4.0 * nu * nz**3,
        8.0 * nz**2 * nu**2,
        4.0 * nz * nu**3,
    )


def _resolve_h(mu: ParticleMeasure, h: Optional[float]) -> float:
    if h is not None:
        return float(h)
    if mu.homogeneous_dimension is None:
        raise InvalidArgumentError("homogeneous dimension unknown for this cloud; pass h")
    return float(mu.homogeneous_dimension)


def _check_s(s: float) -> None:
    if not (np.isfinite(s) and s > 0):
        raise InvalidArgumentError(f"s must be positive, got {s}")


def _gaussian(mu: ParticleMeasure, s: float) -> np.ndarray:
    return np.exp(-s * koranyi_norm(mu.coords) ** 4)


def _normalizer(h: float) -> float:
    return float(special.gamma(h / 4 + 1))


def moment(mu: ParticleMeasure, k: int, s: float, u: Point, h: Optional[float] = None) -> MassEstimate:
    """b_{k,s}(u) = s^{k+h/4} / (k! C(h)) * int (2V(u,z))^k e^{-s|z|^4} dmu(z); b_{0,s} = 1."""
    if k < 0:
        raise InvalidArgumentError(f"k must be >= 0, got {k}")
    _check_s(s)
    if k == 0:
        return MassEstimate(1.0, 0.0, 0)
    h = _resolve_h(mu, h)
    V, _, _, _ = polarization_arrays(u.coords, mu.coords)
    factor = s ** (k + h / 4) / (factorial(k) * _normalizer(h))
    return mu.integrate((2.0 * V) ** k * _gaussian(mu, s)).scaled(factor)


def _c_integrand(parts, alpha: tuple[int, int, int], s: float, h: float, gaussian: np.ndarray) -> np.ndarray:
    _, L, Q, T = parts
    a1, a2, a3 = alpha
    factor = s ** (a1 + a2 + a3 + h / 4) / (factorial(a1) * factorial(a2) * factorial(a3) * _normalizer(h))
    return factor * L**a1 * Q**a2 * T**a3 * gaussian


def _check_alpha(alpha) -> tuple[int, int, int]:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != 3 or min(alpha) < 0 or sum(alpha) == 0:
        raise InvalidArgumentError(f"alpha must be a non-zero triple of non-negative integers, got {alpha}")
    return alpha


def c_alpha(
    mu: ParticleMeasure, alpha: Sequence[int], s: float, u: Point, h: Optional[float] = None
) -> MassEstimate:
    """c_{alpha,s}(u): the (L, Q, T) multinomial pieces of b_{|alpha|,s}(u)."""
    alpha = _check_alpha(alpha)
    _check_s(s)
    h = _resolve_h(mu, h)
    parts = polarization_arrays(u.coords, mu.coords)
    return mu.integrate(_c_integrand(parts, alpha, s, h, _gaussian(mu, s)))


def multi_indices(k: int) -> list[tuple[int, int, int]]:
    return [(a, b, k - a - b) for a, b in product(range(k + 1), repeat=2) if a + b <= k]


def splitter_defect(mu: ParticleMeasure, k: int, s: float, u: Point, h: Optional[float] = None) -> MassEstimate:
    """sum_{|alpha|=k} c_{alpha,s}(u) - b_{k,s}(u), as one integrand."""
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    _check_s(s)
    h = _resolve_h(mu, h)
    parts = polarization_arrays(u.coords, mu.coords)
    g = _gaussian(mu, s)
    total = sum(_c_integrand(parts, alpha, s, h, g) for alpha in multi_indices(k))
    b = s ** (k + h / 4) / (factorial(k) * _normalizer(h)) * (2.0 * parts[0]) ** k * g
    return mu.integrate(total - b)


QUARTIC_INDICES = ((4, 0, 0), (2, 1, 0), (0, 2, 0), (1, 0, 1))


def quartic_defect(mu: ParticleMeasure, u: Point, h: Optional[float] = None) -> MassEstimate:
    """c_{400,1} + c_{210,1} + c_{020,1} + c_{101,1} - |u|^4; zero on the support of dilation-invariant uniform measures."""
    h = _resolve_h(mu, h)
    parts = polarization_arrays(u.coords, mu.coords)
    g = _gaussian(mu, 1.0)
    total = sum(_c_integrand(parts, alpha, 1.0, h, g) for alpha in QUARTIC_INDICES)
    estimate = mu.integrate(total)
    return MassEstimate(estimate.value - float(koranyi_norm(u.coords)) ** 4, estimate.std_error, estimate.n_samples)


def moment_bound(k: int, s: float, u: Point, h: float) -> float:
    """Explicit upper bound for |b_{k,s}(u)| on h-uniform measures."""
    x = float(koranyi_norm(u.coords)) * s**0.25
    return (
        16.0**k * x**k / factorial(k)
        * float(special.gamma((h + 3 * k) / 4) / special.gamma(h / 4))
        * (x ** (2 * k) + 1.0)
    )


@dataclass(frozen=True, eq=False)
class MomentCurves:
    s: float
    b: np.ndarray
    Q: np.ndarray
    T: float
    b_std: np.ndarray
    Q_std: np.ndarray
    T_std: float

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "b": self.b.tolist(),
            "Q": self.Q.tolist(),
            "T": self.T,
            "stderr": {"b": self.b_std.tolist(), "Q": self.Q_std.tolist(), "T": self.T_std},
        }


def moment_curves(mu: ParticleMeasure, s: float, h: Optional[float] = None) -> MomentCurves:
    """
    b(s) = 4 s^{1/2+h/4}/C int |z_H|^2 z_H e,
    Q(s) = 8 s^{3/2+h/4}/C int |z_H|^4 z_H z_H^T e - s^{1/2+h/4}/C int (4 z_H z_H^T + 2|z_H|^2 I) e,
    T(s) = 2 s^{1/2+h/4}/C int z_T e,
    with e = e^{-s|z|^4} and C = Gamma(h/4 + 1).

    T carries the same s^{1/2+h/4} prefactor as b and the second part of Q,
    not s^{1+h/4}: that is the power for which

        c_{100,s}(u) + c_{200,s}(u) + c_{010,s}(u)
            = sqrt(s) (<b(s), u_H> + <Q(s) u_H, u_H> + T(s) u_T)

    holds on every cloud, since c_{010,s} contributes 2 s^{1+h/4}/C int z_T u_T e.
    """
    _check_s(s)
    h = _resolve_h(mu, h)
    n = mu.n
    C = _normalizer(h)
    g = _gaussian(mu, s)
    zh, zt = mu.coords[:, :-1], mu.coords[:, -1]
    zz = np.sum(zh * zh, axis=1)
    half = s ** (0.5 + h / 4) / C
    outer = zh[:, :, None] * zh[:, None, :]
    q_integrand = (
        8.0 * s ** (1.5 + h / 4) / C * (zz**2)[:, None, None] * outer
        - half * (4.0 * outer + 2.0 * zz[:, None, None] * np.eye(n))
    ) * g[:, None, None]
    b = mu.integrate_vector(4.0 * half * (zz * g)[:, None] * zh)
    Q = mu.integrate_vector(q_integrand)
    T = mu.integrate(2.0 * half * zt * g)
    Qv = 0.5 * (Q.values + Q.values.T)
    return MomentCurves(s, b.values, Qv, T.value, b.std_errors, Q.std_errors, T.std_error)


def curve_residual(curves: MomentCurves, u: Point) -> float:
    """|<b(s), u_H> + <Q(s) u_H, u_H> + T(s) u_T|."""
    return abs(float(curves.b @ u.h + u.h @ curves.Q @ u.h + curves.T * u.t))


def trace_probe(mu: ParticleMeasure, s: float, h: Optional[float] = None) -> MassEstimate:
    """Tr Q(s) as a single integrand."""
    _check_s(s)
    h = _resolve_h(mu, h)
    C = _normalizer(h)
    zz = np.sum(mu.coords[:, :-1] ** 2, axis=1)
    integrand = (
        8.0 * s ** (1.5 + h / 4) * zz**3 - (2.0 * mu.n + 4.0) * s ** (0.5 + h / 4) * zz
    ) / C * _gaussian(mu, s)
    return mu.integrate(integrand)


def moment_matrix(mu: ParticleMeasure) -> VectorEstimate:
    """M = int |z_H|^4 z_H z_H^T e^{-|z|^4} dmu."""
    zh = mu.coords[:, :-1]
    zz = np.sum(zh * zh, axis=1)
    w = zz**2 * _gaussian(mu, 1.0)
    return mu.integrate_vector(w[:, None, None] * zh[:, :, None] * zh[:, None, :])


def flatness_functional(mu: ParticleMeasure) -> MassEstimate:
    """
    inf over unit u of int |z_H|^4 <z_H, u>^2 e^{-|z|^4} dmu, i.e. the smallest
    eigenvalue of the moment matrix. The standard error is that of the quadratic
    form along the minimizing eigenvector.
    """
    M = moment_matrix(mu).values
    M = 0.5 * (M + M.T)
    eigvals, eigvecs = np.linalg.eigh(M)
    v = eigvecs[:, 0]
    zh = mu.coords[:, :-1]
    zz = np.sum(zh * zh, axis=1)
    along = mu.integrate(zz**2 * (zh @ v) ** 2 * _gaussian(mu, 1.0))
    return MassEstimate(float(max(eigvals[0], 0.0)), along.std_error, along.n_samples)


def expansion_residual(
    mu: ParticleMeasure, u: Point, s: float, q: int, h: Optional[float] = None
) -> MassEstimate:
    """
    |sum_{k=1}^{4q} b_{k,s}(u) - sum_{k=1}^{q} s^k |u|^{4k} / k!| from one integrand.

    The residual itself is `.value`; `.std_error` is the sampling error of the
    moment sum (zero on quadrature lattices).
    """
    if q < 1:
        raise InvalidArgumentError(f"q must be >= 1, got {q}")
    _check_s(s)
    h = _resolve_h(mu, h)
    V, _, _, _ = polarization_arrays(u.coords, mu.coords)
    g = _gaussian(mu, s)
    C = _normalizer(h)
    integrand = sum(s ** (k + h / 4) / (factorial(k) * C) * (2.0 * V) ** k for k in range(1, 4 * q + 1)) * g
    estimate = mu.integrate(integrand)
    u4 = float(koranyi_norm(u.coords)) ** 4
    target = sum((s * u4) ** k / factorial(k) for k in range(1, q + 1))
    return MassEstimate(abs(estimate.value - target), estimate.std_error, estimate.n_samples)


def expansion_envelope(s: float, u: Point, q: int) -> float:
    """(s|u|^4)^{q+1/4} (2 + (s|u|^4)^{2q})."""
    x = s * float(koranyi_norm(u.coords)) ** 4
    return x ** (q + 0.25) * (2.0 + x ** (2 * q))


def fit_expansion_constant(residuals: Sequence[float], s_values: Sequence[float], u: Point, q: int) -> float:
    """Smallest G with residual <= G * envelope on the given grid."""
    return max(r / expansion_envelope(s, u, q) for r, s in zip(residuals, s_values))


def log_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def degeneracy_probe(mu: ParticleMeasure, s_grid: Sequence[float], h: Optional[float] = None) -> list[float]:
    """Operator norm of Q(s) along a decreasing s grid."""
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0) or np.any(np.diff(s_grid) >= 0):
        raise InvalidArgumentError("s_grid must be positive and strictly decreasing")
    return [float(np.linalg.norm(moment_curves(mu, s, h).Q, 2)) for s in s_grid]


def gaussian_radial_integral(mu: ParticleMeasure, u: Point, s: float, p: float) -> MassEstimate:
    """int |z - u|^p e^{-s |z - u|^4} dmu(z)."""
    _check_s(s)
    d = koranyi_norm(mu.coords - u.coords)
    return mu.integrate(d**p * np.exp(-s * d**4))


def radial_closed_form(h: float, s: float, p: float) -> float:
    """(h/4) s^{-(h+p)/4} Gamma((h+p)/4): the radial integral on an h-uniform measure."""
    return h / 4 * s ** (-(h + p) / 4) * float(special.gamma((h + p) / 4))


@dataclass(frozen=True, eq=False)
class MomentReport:
    s: float
    u: Point
    b: dict[int, MassEstimate]
    c: dict[tuple[int, int, int], MassEstimate]
    curves: MomentCurves
    F: MassEstimate
    quartic: Optional[MassEstimate] = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "s": self.s,
            "u": self.u.to_dict(),
            "b": {str(k): v.to_dict() for k, v in self.b.items()},
            "c": {"".join(map(str, a)): v.to_dict() for a, v in self.c.items()},
            "curves": self.curves.to_dict(),
            "F": self.F.to_dict(),
        }
        if self.quartic is not None:
            out["quartic_defect"] = self.quartic.to_dict()
        out.update(self.extras)
        return out


def moment_report(
    mu: ParticleMeasure, s: float, u: Point, k_max: int = 3, h: Optional[float] = None
) -> MomentReport:
    b = {k: moment(mu, k, s, u, h) for k in range(0, k_max + 1)}
    c = {alpha: c_alpha(mu, alpha, s, u, h) for k in range(1, k_max + 1) for alpha in multi_indices(k)}
    return MomentReport(
        s=s,
        u=u,
        b=b,
        c=c,
        curves=moment_curves(mu, s, h),
        F=flatness_functional(mu),
        quartic=quartic_defect(mu, u, h),
    )
