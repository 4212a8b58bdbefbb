import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, Sequence, TypeVar

import numpy as np
from scipy import special
from scipy.linalg import null_space
from scipy.stats import norm as normal_dist
from scipy.stats import qmc

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class InMemoryCache:
    """Process-wide memo for per-dimension constants, keyed by `generate_cache_key`."""

    def __init__(self) -> None:
        self._cache: Dict[str, Any] = {}

    def __contains__(self, key: str) -> bool:
        return key in self._cache

    def get_or_compute(self, key: str, compute: Callable[[], T]) -> T:
        if key not in self._cache:
            self._cache[key] = compute()
            logger.debug("cache fill %s", key)
        return self._cache[key]


def generate_cache_key(prefix: str, data: Dict[str, Any]) -> str:
    """Generates a deterministic hash key for a given prefix and data dictionary."""
    serialized = json.dumps(data, sort_keys=True)
    hash_val = hashlib.sha256(serialized.encode()).hexdigest()
    return f"{prefix}:{hash_val}"


def derive_seed(seed: int, *labels: int | str) -> int:
    """Child seed for an independent stream, stable across runs and job counts."""
    entropy = [seed] + [
        int(hashlib.sha256(label.encode()).hexdigest()[:8], 16) if isinstance(label, str) else label
        for label in labels
    ]
    return int(np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32).view(np.uint64)[0])


def parallel_map(func: Callable[[T], R], items: Sequence[T] | Iterable[T], jobs: int = 1) -> list[R]:
    """Maps `func` over `items`; results keep input order whatever `jobs` is."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def sphere_area(dim: int) -> float:
    """Area of the unit sphere S^dim in R^(dim+1); S^0 is two points."""
    if dim < 0:
        raise ValueError("sphere dimension must be >= 0")
    return float(2.0 * np.pi ** ((dim + 1) / 2) / special.gamma((dim + 1) / 2))


def ball_volume(dim: int, radius: float = 1.0) -> float:
    return float(np.pi ** (dim / 2) / special.gamma(dim / 2 + 1) * radius**dim)


def uniform_sphere(rng: np.random.Generator, count: int, ambient: int) -> np.ndarray:
    x = rng.standard_normal((count, ambient))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def uniform_cap(
    rng: np.random.Generator, count: int, axis: np.ndarray, half_angle: float
) -> tuple[np.ndarray, float]:
    """
    Uniform directions on the cap of S^{d-1} around `axis` with the given half angle.

    Returns the directions and the cap area as a fraction of the whole sphere.
    For d=1 the sphere is {-1, 1}: the cap is the sign of `axis` unless the
    half angle reaches pi/2.
    """
    axis = np.asarray(axis, dtype=float)
    d = axis.shape[0]
    if d == 1:
        if half_angle >= np.pi / 2:
            return rng.choice([-1.0, 1.0], size=(count, 1)), 1.0
        return np.full((count, 1), np.sign(axis[0]) or 1.0), 0.5
    if half_angle >= np.pi:
        return uniform_sphere(rng, count, d), 1.0
    a = (d - 1) / 2
    fraction = float(special.betainc(a, a, (1.0 - np.cos(half_angle)) / 2))
    u = special.betaincinv(a, a, rng.random(count) * fraction)
    cos_angle = 1.0 - 2.0 * u
    sin_angle = np.sqrt(np.clip(1.0 - cos_angle**2, 0.0, None))
    perp = uniform_sphere(rng, count, d)
    perp -= np.outer(perp @ axis, axis)
    perp /= np.linalg.norm(perp, axis=1, keepdims=True)
    return cos_angle[:, None] * axis + sin_angle[:, None] * perp, fraction


def fibonacci_directions(n: int, count: int) -> np.ndarray:
    """
    Deterministic, roughly uniform unit vectors in R^n, one per antipodal pair.

    n=2 uses equally spaced angles on [0, pi), n=3 the golden-angle spiral on
    the upper hemisphere, higher n a Sobol sequence mapped through the normal
    quantile.
    """
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        angles = np.pi * np.arange(count) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = i / count
        phi = np.pi * (3.0 - np.sqrt(5.0)) * i
        s = np.sqrt(1.0 - z**2)
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    points = qmc.Sobol(d=n, scramble=True, seed=0).random(count)
    x = normal_dist.ppf(np.clip(points, 1e-12, 1 - 1e-12))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * np.where(x[:, -1:] < 0, -1.0, 1.0)


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Columns form an orthonormal basis of u-perp (shape n x (n-1))."""
    u = np.asarray(u, dtype=float)
    return null_space(u[None, :])


def pattern_search_sphere(
    objective: Callable[[np.ndarray], float],
    start: np.ndarray,
    step: float,
    iterations: int,
) -> tuple[np.ndarray, float]:
    """Compass search on the unit sphere: tangent moves of angle `step`, halved on failure."""
    u = np.asarray(start, dtype=float)
    u = u / np.linalg.norm(u)
    best = objective(u)
    if u.shape[0] == 1:
        return u, best
    for _ in range(iterations):
        improved = False
        for e in orthonormal_complement(u).T:
            for sign in (1.0, -1.0):
                cand = np.cos(step) * u + sign * np.sin(step) * e
                value = objective(cand)
                if value < best:
                    u, best, improved = cand, value, True
                    break
            if improved:
                break
        if not improved:
            step /= 2
    return u, best
