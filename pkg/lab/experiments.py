"""One function per command. Each fills `ctx.results` as it goes and records checks."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from lab.exceptions import BudgetExhaustedError
from lab.schemas import ExperimentConfig
from parabolic.config import WCD_SAMPLES, ZETA_FLOOR
from parabolic.estimators import ball_mass, closed_form_ball_mass, density_curve
from parabolic.geometry import Metric, Point, distances
from parabolic.holder import HolderProfile, box_ball_mass, nonflatness_trace
from parabolic.models import FlatPlane, HolderGraph, KPConeProduct, MeasureModel, VerticalLine
from parabolic.moments import moment_report, quartic_defect, splitter_defect
from parabolic.particles import ParticleMeasure, Proposal, QuadratureRule, WindowProposal, sample, sample_shells
from parabolic.quadric import QuadricFrame, area_direct, expansion_constants, expansion_e_quadrature, fit_expansion
from parabolic.rectifiability import (
    bad_mass_profile,
    beta_numbers,
    carleson_bwgl,
    density_square_function,
    dyadic_decompose,
    square_function_noise_floor,
    wcd_probe,
)
from parabolic.utils import derive_seed, parallel_map

logger = logging.getLogger(__name__)


@dataclass
class Budget:
    limit: int
    used: int = 0

    def charge(self, draws: int) -> None:
        if self.used + draws > self.limit:
            raise BudgetExhaustedError(self.used + draws, self.limit)
        self.used += draws


@dataclass
class ExperimentContext:
    config: ExperimentConfig
    budget: Budget
    results: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)

    def draw(self, model: MeasureModel, N: int, label: str, proposal: Optional[Proposal] = None) -> ParticleMeasure:
        self.budget.charge(N)
        return sample(model, N, derive_seed(self.config.seed, label), proposal=proposal)

    def check(self, name: str, value: float, target: float, tolerance: float, passed: Optional[bool] = None) -> bool:
        if passed is None:
            passed = bool(abs(value - target) <= tolerance)
        self.checks.append(
            {
                "name": name,
                "value": float(value),
                "target": float(target),
                "tolerance": float(tolerance),
                "passed": bool(passed),
            }
        )
        return passed


def _uniform_models(model: MeasureModel) -> bool:
    """Models whose measure is uniform with constant 1 in the Koranyi metric."""
    if isinstance(model, VerticalLine):
        return model.n == 1
    return isinstance(model, (FlatPlane, KPConeProduct))


def verify_uniform(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    model = cfg.model.build()
    h = model.homogeneous_dimension
    radii = cfg.radii or [0.25, 0.5, 1.0]
    anchors = ctx.draw(model, max(64, cfg.points), "anchors")
    rng = np.random.default_rng(derive_seed(cfg.seed, "picks"))
    picks = rng.choice(anchors.size, size=min(cfg.points, anchors.size), replace=False)
    target = 2.0 if isinstance(model, HolderGraph) and cfg.metric == Metric.BOX else 1.0
    rows = []
    ctx.results["balls"] = rows
    for i, idx in enumerate(picks):
        x = Point.from_coords(anchors.coords[idx])
        for j, r in enumerate(radii):
            cloud = ctx.draw(model, cfg.samples, f"ball-{i}-{j}", WindowProposal(x, r))
            density = ball_mass(cloud, x, r, cfg.metric).scaled(r**-h)
            exact = closed_form_ball_mass(model, x, r, cfg.metric)
            rows.append(
                {
                    "center": x.to_dict(),
                    "r": r,
                    "density": density.to_dict(),
                    "exact": None if exact is None else exact / r**h,
                }
            )
            ctx.check(f"density[{i},{j}]", density.value, target, cfg.tolerance * density.std_error)
    ctx.results["max_deviation"] = max(abs(row["density"]["value"] - target) for row in rows)


def _moment_point(cfg: ExperimentConfig, mu: ParticleMeasure) -> Point:
    """The configured centre, else the atom nearest to (0.25, ..., 0.25, 0.1) so that u lies on the support."""
    if cfg.center is not None:
        return cfg.center_point()
    probe = Point(np.full(cfg.model.n, 0.25), 0.1)
    return Point.from_coords(mu.coords[int(np.argmin(distances(mu.coords, probe)))])


def moments(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    model = cfg.model.build()
    mu = ctx.draw(model, cfg.samples, "cloud")
    u = _moment_point(cfg, mu)
    report = moment_report(mu, cfg.s, u, cfg.k_max)
    ctx.results["report"] = report.to_dict()
    for k in range(1, cfg.k_max + 1):
        defect = splitter_defect(mu, k, cfg.s, u)
        ctx.check(f"splitter[k={k}]", defect.value, 0.0, cfg.tolerance * defect.std_error + 1e-12)
    if _uniform_models(model):
        quartic = quartic_defect(mu, u)
        ctx.check("quartic", quartic.value, 0.0, cfg.tolerance * quartic.std_error)


def beta(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    model = cfg.model.build()
    x = cfg.center_point()
    radii = cfg.radii or [0.5, 1.0, 2.0]
    mu = ctx.draw(model, cfg.samples, "cloud", WindowProposal(x, max(radii)))
    rows = []
    ctx.results["betas"] = rows
    for r in radii:
        pair = beta_numbers(mu, x, r)
        rows.append({"r": r, **pair.to_dict()})
        if isinstance(model, FlatPlane) or (isinstance(model, VerticalLine) and model.n == 1):
            ctx.check(f"beta_flat[r={r:g}]", pair.beta, 0.0, 1e-9)


def bwgl(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    model = cfg.model.build()
    x = cfg.center_point()
    radius = cfg.radii[0] if cfg.radii else 1.0
    if isinstance(model, (FlatPlane, VerticalLine, HolderGraph)):
        proposal = QuadratureRule(scale=radius / 2, center=x)
    else:
        proposal = WindowProposal(x, radius)
    mu = ctx.draw(model, cfg.samples, "cloud", proposal)
    tree = dyadic_decompose(mu, cfg.depth, cfg.j0, region=(x, radius), jobs=cfg.jobs)
    value = carleson_bwgl(tree, cfg.eta)
    ctx.results.update(
        {
            "eta": cfg.eta,
            "carleson_sum": value,
            "profile": bad_mass_profile(tree, cfg.eta),
            "cubes": len(tree.cubes),
        }
    )
    if isinstance(model, FlatPlane):
        ctx.check("bwgl_flat", value, 0.0, 0.0)


def wcd(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    model = cfg.model.build()
    x = cfg.center_point()
    r = cfg.radii[0] if cfg.radii else 1.0
    mu = ctx.draw(model, cfg.samples, "cloud", WindowProposal(x, 2.0 * r))
    result = wcd_probe(mu, x, r, cfg.eps, samples=WCD_SAMPLES, seed=cfg.seed)
    ctx.results["wcd"] = result.to_dict()
    if _uniform_models(model):
        ctx.check("wcd_candidate", result.worst_deviation, 0.0, cfg.eps, passed=result.passed)


def quadric_expansion(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    D = np.asarray(cfg.model.D, dtype=float)
    n = D.shape[0]
    x = np.asarray(cfg.center[:-1]) if cfg.center is not None else np.ones(n) / np.sqrt(n)
    frame = QuadricFrame(D, x)
    radii = cfg.radii or [2.0 ** (-3 - j / 2) for j in range(9)]
    logger.info("quadric expansion n=%d over %d radii", n, len(radii))
    areas = parallel_map(lambda r: area_direct(frame, r, seed=cfg.seed), radii, cfg.jobs)
    ctx.results.update({"n": n, "D": D.tolist(), "x": x.tolist(), "radii": list(radii), "areas": areas})
    fit = fit_expansion(list(zip(radii, areas)), n, extra_orders=(4,))
    constants = expansion_constants(frame)
    ctx.results.update(
        {
            "c_hat": fit.c_hat,
            "zeta_hat": fit.zeta_hat,
            "e_hat": fit.e_hat,
            "std_errors": list(fit.std_errors),
            "c_formula": constants.c_n,
            "e_formula": constants.e,
            "e_quadrature": expansion_e_quadrature(frame, seed=cfg.seed),
            "bracket": constants.bracket,
        }
    )
    ctx.check("c_n", fit.c_hat, constants.c_n, 0.01 * constants.c_n)
    ctx.check("zeta", fit.zeta_hat, 0.0, cfg.tolerance * fit.std_errors[1] + ZETA_FLOOR * abs(fit.c_hat))
    ctx.check("e", fit.e_hat, constants.e, cfg.rel_tolerance * abs(constants.e))


def counterexample(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    profile = cfg.model.profile()
    scales = cfg.radii or [2.0**-k for k in range(1, 7)]
    t0 = cfg.center[-1] if cfg.center is not None else 0.0
    x = Point(np.array([float(profile(np.array([t0]))[0])]), t0)
    ctx.results["profile"] = profile.to_dict()
    ctx.check("certified_constant", profile.holder_constant, 1.0, 0.0, passed=profile.holder_constant <= 1.0)

    ctx.budget.charge(cfg.samples)
    box = box_ball_mass(profile, x, scales[0], N=cfg.samples, seed=derive_seed(cfg.seed, "box"))
    ctx.results["box_ball"] = box.to_dict()
    ctx.check("box_exact", box.exact, 2.0 * scales[0] ** 2, 0.0)
    ctx.check("box_estimate", box.estimate.value, box.exact, cfg.tolerance * box.estimate.std_error)

    spreads = {}
    for label, prof in (("profile", profile), ("flat", HolderProfile.flat())):
        model = HolderGraph(prof)
        centre = Point(np.array([float(prof(np.array([t0]))[0])]), t0)
        values = []
        for i, r in enumerate(sorted(scales)):
            lattice = ctx.draw(model, cfg.samples, f"density-{label}-{i}", QuadratureRule(scale=r, center=centre))
            values.append(density_curve(lattice, centre, [r], 2)[0].value)
        ctx.results[f"koranyi_density_{label}"] = values
        spreads[label] = float(max(values) - min(values))
    ctx.results["spreads"] = spreads
    threshold = 10.0 * spreads["flat"]
    ctx.check("nonconstant_density", spreads["profile"], threshold, 0.0, passed=spreads["profile"] > threshold)

    ctx.budget.charge(cfg.samples * len(scales))
    trace = nonflatness_trace(profile, x, scales, N=cfg.samples, seed=cfg.seed, jobs=cfg.jobs)
    ctx.results["trace"] = [row.to_dict() for row in trace]


def square_function(ctx: ExperimentContext) -> None:
    cfg = ctx.config
    model = cfg.model.build()
    x = cfg.center_point()
    R = cfg.radii[-1] if cfg.radii else 1.0
    # Shells reach 2R since the integrand compares B(x, r) with B(x, 2r).
    r_min = R * 2.0**-6
    levels = int(np.ceil(np.log2(2.0 * R / r_min))) + 1
    ctx.budget.charge(cfg.samples * levels)
    mu = sample_shells(model, x, r_min, 2.0 * R, cfg.samples, derive_seed(cfg.seed, "shells"))
    value = density_square_function(mu, x, R, cfg.q, min_atoms=cfg.min_atoms)
    floor = square_function_noise_floor(mu, x, R, cfg.q, min_atoms=cfg.min_atoms)
    ctx.results.update({"R": R, "q": cfg.q, "value": value, "noise_floor": floor})
    if isinstance(model, FlatPlane):
        ctx.check("square_function_flat", value, 0.0, cfg.rel_tolerance + cfg.tolerance * floor)


COMMANDS: dict[str, Callable[[ExperimentContext], None]] = {
    "verify-uniform": verify_uniform,
    "moments": moments,
    "beta": beta,
    "bwgl": bwgl,
    "wcd": wcd,
    "quadric-expansion": quadric_expansion,
    "counterexample": counterexample,
    "square-function": square_function,
}
