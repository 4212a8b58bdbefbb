"""Analytic measure models and their normalization constants."""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

import numpy as np
from scipy import integrate, special

from parabolic.exceptions import CertificationError, InvalidArgumentError, UnsupportedModelError
from parabolic.geometry import Point, VerticalHyperplane
from parabolic.utils import InMemoryCache, generate_cache_key, sphere_area

if TYPE_CHECKING:
    from parabolic.holder import HolderProfile

logger = logging.getLogger(__name__)

normalization_cache = InMemoryCache()


def _radial_moment(power: float) -> float:
    """2 * int_0^1 R^power sqrt(1 - R^4) dR: vertical extent of the unit Koranyi ball, radially weighted."""
    value, _ = integrate.quad(lambda rho: rho**power * np.sqrt(1.0 - rho**4), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * value


def flat_normalization(n: int) -> float:
    """Constant making the flat measure on a vertical hyperplane of P^n give unit Koranyi balls mass 1."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if n == 1:
        return 0.5
    key = generate_cache_key("flat_normalization", {"n": n})
    return normalization_cache.get_or_compute(
        key, lambda: 1.0 / (sphere_area(n - 2) * _radial_moment(n - 2))
    )


def cone_unit_mass(p: int, m: int, z: int) -> float:
    """
    Koranyi unit-ball mass at the vertex of the vertically ruled cone
    {|y_P| = |y_M|} x R^z x R, with y_P in R^p and y_M in R^m, carrying
    H^{n-1} x L^1.
    """
    if p < 1 or m < 1 or z < 0:
        raise InvalidArgumentError(f"cone needs p, m >= 1 and z >= 0, got {(p, m, z)}")
    angular = sphere_area(p - 1) * sphere_area(m - 1) * 2.0 ** (-(p + m - 2) / 2)
    if z == 0:
        return angular * _radial_moment(p + m - 2)
    tilt = 0.5 * special.beta((p + m - 1) / 2, z / 2)
    return angular * sphere_area(z - 1) * tilt * _radial_moment(p + m - 2 + z)


def cone_normalization(p: int, m: int, z: int) -> float:
    key = generate_cache_key("cone_normalization", {"p": p, "m": m, "z": z})
    return normalization_cache.get_or_compute(key, lambda: 1.0 / cone_unit_mass(p, m, z))


def kp_normalization(n: int) -> float:
    if n < 4:
        raise InvalidArgumentError(f"the KP cone product needs n >= 4, got {n}")
    return cone_normalization(3, 1, n - 4)


@dataclass(frozen=True, eq=False)
class FlatPlane:
    """normalization * (H^{n-1} on the horizontal plane) x (Lebesgue in t)."""

    plane: VerticalHyperplane
    normalization: Optional[float] = None
    kind: str = field(default="flat_plane", init=False)

    def __post_init__(self):
        if self.normalization is None:
            object.__setattr__(self, "normalization", flat_normalization(self.n))

    @property
    def n(self) -> int:
        return self.plane.n

    @property
    def homogeneous_dimension(self) -> int:
        return self.n + 1

    def parametrize(self, params: np.ndarray) -> np.ndarray:
        """(m, n) parameters (a in R^{n-1}, t) to (m, n+1) coordinates."""
        h = self.plane.base_point() + params[:, :-1] @ self.plane.basis().T
        return np.column_stack([h, params[:, -1]])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "plane": self.plane.to_dict(), "normalization": self.normalization}


@dataclass(frozen=True, eq=False)
class VerticalLine:
    base: Point
    normalization: float = 0.5
    kind: str = field(default="vertical_line", init=False)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def homogeneous_dimension(self) -> int:
        return 2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "base": self.base.to_dict(), "normalization": self.normalization}


@dataclass(frozen=True, eq=False)
class QuadricGraph:
    """Graph t = <y, D y> + <b, y> with its surface measure |grad f| dy."""

    D: np.ndarray
    b: Optional[np.ndarray] = None
    normalization: float = 1.0
    kind: str = field(default="quadric_graph", init=False)

    def __post_init__(self):
        D = np.atleast_2d(np.array(self.D, dtype=float))
        if D.shape[0] != D.shape[1] or not np.allclose(D, D.T, atol=1e-12):
            raise InvalidArgumentError("D must be a symmetric square matrix")
        if not np.any(D):
            raise InvalidArgumentError("D must be non-zero")
        b = np.zeros(D.shape[0]) if self.b is None else np.array(self.b, dtype=float).reshape(-1)
        if b.shape[0] != D.shape[0]:
            raise InvalidArgumentError("b must have length n")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def homogeneous_dimension(self) -> int:
        return self.n + 1

    def height(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("ij,jk,ik->i", y, self.D, y) + y @ self.b

    def gradient_norm(self, y: np.ndarray) -> np.ndarray:
        return np.linalg.norm(2.0 * y @ self.D + self.b, axis=1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "D": self.D.tolist(), "b": self.b.tolist(), "normalization": self.normalization}


@dataclass(frozen=True, eq=False)
class ConeCylinder:
    """
    The vertically ruled set {<y, Q y> + <b, y> = 0} x R.

    Sampling is supported for b = 0 and Q with eigenvalues in {lam, -lam, 0}
    (lam > 0, at least one of each sign): in the eigenbasis the set is
    {|y_P| = |y_M|} x R^z x R.
    """

    Q: np.ndarray
    b: Optional[np.ndarray] = None
    normalization: Optional[float] = None
    kind: str = field(default="cone_cylinder", init=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.array(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, atol=1e-12):
            raise InvalidArgumentError("Q must be a symmetric square matrix")
        b = np.zeros(Q.shape[0]) if self.b is None else np.array(self.b, dtype=float).reshape(-1)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)
        if self.normalization is None:
            p, m, z = self.signature
            object.__setattr__(self, "normalization", cone_normalization(p, m, z))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def homogeneous_dimension(self) -> int:
        return self.n + 1

    @property
    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Column bases of the positive, negative and null eigenspaces."""
        if np.any(self.b):
            raise UnsupportedModelError("cone cylinders with b != 0 cannot be sampled")
        eigvals, eigvecs = np.linalg.eigh(self.Q)
        scale = np.max(np.abs(eigvals))
        tol = 1e-9 * max(scale, 1.0)
        pos = eigvals > tol
        neg = eigvals < -tol
        zero = ~(pos | neg)
        if not pos.any() or not neg.any():
            raise UnsupportedModelError("Q must have eigenvalues of both signs")
        if not np.allclose(np.abs(eigvals[pos | neg]), scale, rtol=1e-9):
            raise UnsupportedModelError("only Q with eigenvalues in {lam, -lam, 0} is supported")
        return eigvecs[:, pos], eigvecs[:, neg], eigvecs[:, zero]

    @property
    def signature(self) -> tuple[int, int, int]:
        P, M, Z = self.frame
        return P.shape[1], M.shape[1], Z.shape[1]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "Q": self.Q.tolist(), "b": self.b.tolist(), "normalization": self.normalization}


class KPConeProduct(ConeCylinder):
    """{x1^2 + x2^2 + x3^2 = x4^2} x R^{n-4} x R, normalized to be (n+1)-uniform."""

    def __init__(self, n: int, normalization: Optional[float] = None):
        if n < 4:
            raise InvalidArgumentError(f"the KP cone product needs n >= 4, got {n}")
        Q = np.zeros((n, n))
        Q[[0, 1, 2], [0, 1, 2]] = 1.0
        Q[3, 3] = -1.0
        super().__init__(Q, None, kp_normalization(n) if normalization is None else normalization)
        object.__setattr__(self, "kind", "kp_cone")

    @property
    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        eye = np.eye(self.n)
        return eye[:, :3], eye[:, 3:4], eye[:, 4:]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "normalization": self.normalization}


@dataclass(frozen=True, eq=False)
class HolderGraph:
    """Pushforward of Lebesgue measure under t -> (f(t), t) in P^1."""

    profile: "HolderProfile"
    normalization: float = 1.0
    kind: str = field(default="holder_graph", init=False)

    def __post_init__(self):
        if self.profile.holder_constant > 1.0:
            raise CertificationError(self.profile.holder_constant, 1.0)

    @property
    def n(self) -> int:
        return 1

    @property
    def homogeneous_dimension(self) -> int:
        return 2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "profile": self.profile.to_dict(), "normalization": self.normalization}


MeasureModel = Union[FlatPlane, VerticalLine, QuadricGraph, ConeCylinder, HolderGraph]
