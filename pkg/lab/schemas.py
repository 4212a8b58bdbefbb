import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from lab.exceptions import ConfigError
from parabolic.config import DEFAULT_BUDGET, DEFAULT_SAMPLES
from parabolic.geometry import Metric, Point, VerticalHyperplane
from parabolic.holder import HolderProfile, weierstrass_profile
from parabolic.models import ConeCylinder, FlatPlane, HolderGraph, KPConeProduct, QuadricGraph, VerticalLine
from parabolic.settings import DEFAULT_JOBS, DEFAULT_SEED

Command = Literal[
    "verify-uniform",
    "moments",
    "beta",
    "bwgl",
    "wcd",
    "quadric-expansion",
    "counterexample",
    "square-function",
]


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FlatPlaneSpec(_Spec):
    kind: Literal["flat_plane"] = "flat_plane"
    n: int = Field(2, ge=1)
    normal: Optional[list[float]] = None
    offset: float = 0.0

    @model_validator(mode="after")
    def _check_normal(self):
        if self.normal is not None and len(self.normal) != self.n:
            raise ValueError(f"normal must have {self.n} entries")
        return self

    def build(self) -> FlatPlane:
        u = np.eye(self.n)[0] if self.normal is None else np.asarray(self.normal, dtype=float)
        return FlatPlane(VerticalHyperplane(u / np.linalg.norm(u), self.offset))


class VerticalLineSpec(_Spec):
    kind: Literal["vertical_line"] = "vertical_line"
    n: int = Field(1, ge=1)
    base: Optional[list[float]] = None

    def build(self) -> VerticalLine:
        h = np.zeros(self.n) if self.base is None else np.asarray(self.base, dtype=float)
        return VerticalLine(Point(h, 0.0))


class QuadricGraphSpec(_Spec):
    kind: Literal["quadric_graph"] = "quadric_graph"
    D: list[list[float]]
    b: Optional[list[float]] = None

    @property
    def n(self) -> int:
        return len(self.D)

    def build(self) -> QuadricGraph:
        return QuadricGraph(np.asarray(self.D, dtype=float), None if self.b is None else np.asarray(self.b))


class ConeCylinderSpec(_Spec):
    kind: Literal["cone_cylinder"] = "cone_cylinder"
    Q: list[list[float]]

    @property
    def n(self) -> int:
        return len(self.Q)

    def build(self) -> ConeCylinder:
        return ConeCylinder(np.asarray(self.Q, dtype=float))


class KPConeSpec(_Spec):
    kind: Literal["kp_cone"] = "kp_cone"
    n: int = Field(4, ge=4)

    def build(self) -> KPConeProduct:
        return KPConeProduct(self.n)


class HolderGraphSpec(_Spec):
    kind: Literal["holder_graph"] = "holder_graph"
    base: int = Field(4, ge=4)
    levels: int = Field(4, ge=0)
    seed: int = 0
    flat: bool = False

    @property
    def n(self) -> int:
        return 1

    def profile(self) -> HolderProfile:
        return HolderProfile.flat() if self.flat else weierstrass_profile(self.base, self.levels, self.seed)

    def build(self) -> HolderGraph:
        return HolderGraph(self.profile())


ModelSpec = Annotated[
    Union[FlatPlaneSpec, VerticalLineSpec, QuadricGraphSpec, ConeCylinderSpec, KPConeSpec, HolderGraphSpec],
    Field(discriminator="kind"),
]

_DEFAULT_MODELS: dict[str, dict] = {
    "verify-uniform": {"kind": "flat_plane", "n": 2},
    "moments": {"kind": "flat_plane", "n": 2},
    "beta": {"kind": "flat_plane", "n": 2},
    "bwgl": {"kind": "flat_plane", "n": 1},
    "wcd": {"kind": "flat_plane", "n": 2},
    "quadric-expansion": {"kind": "quadric_graph", "D": [[1.0, 0.0], [0.0, -1.0]]},
    "counterexample": {"kind": "holder_graph"},
    "square-function": {"kind": "flat_plane", "n": 2},
}


_REQUIRED_KIND = {"quadric-expansion": "quadric_graph", "counterexample": "holder_graph"}


class ExperimentConfig(BaseModel):
    """Everything that determines a report. `out` and `jobs` do not affect results."""

    model_config = ConfigDict(extra="forbid")

    command: Command
    model: Optional[ModelSpec] = None
    samples: int = Field(DEFAULT_SAMPLES, ge=1)
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    jobs: int = Field(DEFAULT_JOBS, ge=1)
    budget: int = Field(DEFAULT_BUDGET, ge=1)
    metric: Metric = Metric.KORANYI
    center: Optional[list[float]] = None
    radii: list[Annotated[float, Field(gt=0)]] = Field(default_factory=list)
    points: int = Field(5, ge=1)
    tolerance: float = Field(3.0, gt=0)
    rel_tolerance: float = Field(0.02, gt=0)
    s: float = Field(1.0, gt=0)
    k_max: int = Field(3, ge=1, le=4)
    eta: float = Field(0.1, gt=0)
    eps: float = Field(0.1, gt=0)
    depth: int = Field(3, ge=1)
    j0: int = 0
    q: float = Field(1.0, gt=0)
    min_atoms: int = Field(2000, ge=1)
    out: Optional[str] = None

    @model_validator(mode="after")
    def _fill_model(self):
        if self.model is None:
            self.model = _model_adapter(_DEFAULT_MODELS[self.command])
        required = _REQUIRED_KIND.get(self.command)
        if required is not None and self.model.kind != required:
            raise ValueError(f"{self.command} needs a {required} model, got {self.model.kind}")
        if self.center is not None and len(self.center) != self.model.n + 1:
            raise ValueError(f"center must have n+1 = {self.model.n + 1} coordinates (h_1..h_n, t)")
        return self

    def center_point(self) -> Point:
        if self.center is None:
            return Point.origin(self.model.n)
        return Point.from_coords(self.center)

    def canonical(self) -> dict:
        return self.model_dump(mode="json", exclude={"out", "jobs"})


def _model_adapter(data: dict):
    return TypeAdapter(ModelSpec).validate_python(data)


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e))


def load_config(path: str | Path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Reads a JSON config; `overrides` (from command-line flags) win over file values."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return parse_config(data)
