"""Points of the parabolic space, anisotropic dilations, the Koranyi and box metrics,
homogeneous subgroups and vertical hyperplanes."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from parabolic.exceptions import DimensionMismatchError, InvalidArgumentError
from parabolic.utils import orthonormal_complement


class Metric(str, Enum):
    KORANYI = "koranyi"
    BOX = "box"


@dataclass(frozen=True, eq=False)
class Point:
    """A point of P^n: horizontal part `h` in R^n and time coordinate `t`."""

    h: np.ndarray
    t: float

    def __post_init__(self):
        h = np.array(self.h, dtype=float).reshape(-1)
        if h.shape[0] < 1:
            raise InvalidArgumentError("a point needs n >= 1 horizontal coordinates")
        if not (np.all(np.isfinite(h)) and np.isfinite(self.t)):
            raise InvalidArgumentError("point coordinates must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return np.append(self.h, self.t)

    @classmethod
    def from_coords(cls, coords) -> "Point":
        coords = np.asarray(coords, dtype=float)
        return cls(coords[:-1], coords[-1])

    @classmethod
    def origin(cls, n: int) -> "Point":
        return cls(np.zeros(n), 0.0)

    def __add__(self, other: "Point") -> "Point":
        _check_dims(self.n, other.n)
        return Point(self.h + other.h, self.t + other.t)

    def __sub__(self, other: "Point") -> "Point":
        _check_dims(self.n, other.n)
        return Point(self.h - other.h, self.t - other.t)

    def __eq__(self, other) -> bool:
        return isinstance(other, Point) and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def to_dict(self) -> dict:
        return {"h": self.h.tolist(), "t": self.t}


def _check_dims(left: int, right: int) -> None:
    if left != right:
        raise DimensionMismatchError(left, right)


def _check_scale(lam: float) -> None:
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidArgumentError(f"dilation factor must be positive, got {lam}")


def dilate(x: Point, lam: float) -> Point:
    _check_scale(lam)
    return Point(lam * x.h, lam**2 * x.t)


def dilate_coords(coords: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized dilation of an (m, n+1) coordinate array."""
    _check_scale(lam)
    out = np.array(coords, dtype=float)
    out[:, :-1] *= lam
    out[:, -1] *= lam**2
    return out


def distances(coords: np.ndarray, x: Point, metric: Metric = Metric.KORANYI) -> np.ndarray:
    """Distance from every row of an (m, n+1) array to `x`."""
    coords = np.atleast_2d(coords)
    _check_dims(coords.shape[1] - 1, x.n)
    return pair_distances(coords, x.coords[None, :], metric)


def pair_distances(a: np.ndarray, b: np.ndarray, metric: Metric = Metric.KORANYI) -> np.ndarray:
    """Row-wise distance between broadcastable coordinate arrays."""
    dh = a[..., :-1] - b[..., :-1]
    hh = np.sum(dh * dh, axis=-1)
    dt = a[..., -1] - b[..., -1]
    if metric == Metric.KORANYI:
        return np.sqrt(np.sqrt(hh * hh + dt * dt))
    return np.maximum(np.sqrt(hh), np.sqrt(np.abs(dt)))


def distance(x: Point, y: Point, metric: Metric = Metric.KORANYI) -> float:
    _check_dims(x.n, y.n)
    return float(pair_distances(y.coords, x.coords, metric))


@dataclass(frozen=True, eq=False)
class VerticalHyperplane:
    """The vertically invariant set {x : <u, x_H> = c}."""

    unit_normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        u = np.array(self.unit_normal, dtype=float).reshape(-1)
        norm = np.linalg.norm(u)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-9:
            raise InvalidArgumentError(f"normal must have unit length, got |u|={norm}")
        u = u / norm
        u.setflags(write=False)
        object.__setattr__(self, "unit_normal", u)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.unit_normal.shape[0]

    @classmethod
    def through(cls, x: Point, unit_normal) -> "VerticalHyperplane":
        u = np.asarray(unit_normal, dtype=float)
        u = u / np.linalg.norm(u)
        return cls(u, float(u @ x.h))

    def basis(self) -> np.ndarray:
        """Orthonormal basis of the horizontal part V_1, as columns."""
        return orthonormal_complement(self.unit_normal)

    def base_point(self) -> np.ndarray:
        return self.offset * self.unit_normal

    def signed_distance(self, coords: np.ndarray) -> np.ndarray:
        return np.atleast_2d(coords)[:, :-1] @ self.unit_normal - self.offset

    def contains(self, x: Point, atol: float = 1e-12) -> bool:
        return abs(float(self.unit_normal @ x.h) - self.offset) <= atol

    def to_dict(self) -> dict:
        return {"unit_normal": self.unit_normal.tolist(), "offset": self.offset}


def plane_distance(x: Point, plane: VerticalHyperplane, metric: Metric = Metric.KORANYI) -> float:
    """
    Distance from `x` to a vertical hyperplane.

    The plane contains the whole vertical line through each of its points, so
    the nearest point shares x's time coordinate and both metrics reduce to the
    horizontal Euclidean distance.
    """
    _check_dims(x.n, plane.n)
    if metric not in (Metric.KORANYI, Metric.BOX):
        raise InvalidArgumentError(f"unknown metric {metric!r}")
    return abs(float(plane.unit_normal @ x.h) - plane.offset)


@dataclass(frozen=True, eq=False)
class HomSubgroup:
    """
    A homogeneous subgroup: a horizontal subspace V_1 (orthonormal rows of
    `horizontal_basis`), optionally with the vertical axis added.
    """

    n: int
    horizontal_basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    includes_vertical: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError("n must be >= 1")
        basis = np.array(self.horizontal_basis, dtype=float).reshape(-1, self.n)
        if basis.shape[0] > self.n:
            raise InvalidArgumentError("horizontal part larger than R^n")
        if basis.shape[0] and not np.allclose(basis @ basis.T, np.eye(basis.shape[0]), atol=1e-9):
            raise InvalidArgumentError("horizontal basis must be orthonormal")
        object.__setattr__(self, "horizontal_basis", basis)

    @property
    def homogeneous_dimension(self) -> int:
        return self.horizontal_basis.shape[0] + (2 if self.includes_vertical else 0)

    @classmethod
    def vertical_line(cls, n: int) -> "HomSubgroup":
        return cls(n, np.zeros((0, n)), True)

    @classmethod
    def from_hyperplane(cls, plane: VerticalHyperplane) -> "HomSubgroup":
        return cls(plane.n, plane.basis().T, True)

    @classmethod
    def horizontal(cls, n: int) -> "HomSubgroup":
        return cls(n, np.eye(n), False)


def stratification(subgroup: HomSubgroup) -> tuple[int, int]:
    return subgroup.horizontal_basis.shape[0], 1 if subgroup.includes_vertical else 0
