"""Acceptance suite: fourteen criteria, each a function returning (passed, details)."""

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from app.analysis.cauchy import (
    ETA_FLOOR,
    enlarged_frozen_generators,
    lopver_quantity,
    resolvent_norm_scan,
    semisimple_constmult_scan,
    sharp_scalar_condition,
    tangential_system,
)
from app.analysis.fields import Grid
from app.analysis.frequency import Frequency, hemisphere_point, small_ball_samples
from app.analysis.linalg import SubspaceBasis, spectral_split, subspace_det
from app.analysis.lopatinski import Verdict, reduce, scan_uniform, uniform_lop_det
from app.analysis.solvers import fornet_solve, resolvent_estimate_constant
from app.analysis.studies import (
    STABILITY_COLUMNS,
    STABLE_RATIO,
    convergence_study,
    evans_study,
    expansion_study,
    fitted_slope,
    stability_study,
    weighted_study,
)
from app.core.errors import LabError, ModelError, TransversalityFailure, WrongShape
from app.models.expr import BinOp, Call, Const, Neg, Var, compile_expr, evaluate_reference, parse_expr, to_text
from app.models.loader import load_builtin
from app.models.registry import registry
from app.schemas.report import AcceptanceReport, CriterionResult, csv_text, report_json

logger = logging.getLogger("app.analysis.acceptance")

TAGS = ("stability", "cauchy", "evans", "resolvent", "converge", "expand", "property")


@dataclass(frozen=True)
class Context:
    quick: bool = False
    seed: int = 0
    jobs: int = 1

    @property
    def points(self) -> int:
        return 32 if self.quick else 64

    @property
    def epsilons(self) -> list[float]:
        return [0.1, 0.05, 0.025] if self.quick else [0.1, 0.05, 0.025, 0.0125]

    def rng(self, offset: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.seed + offset)


@dataclass(frozen=True)
class Criterion:
    number: int
    tag: str
    title: str
    check: Callable[[Context], tuple[bool, dict]]


# --- stability ------------------------------------------------------------


def neueg_weak_only(ctx: Context):
    model = load_builtin("neueg", alpha=0.3)
    reduced = reduce(model)
    scan = scan_uniform(model, reduced, points=ctx.points, jobs=ctx.jobs)
    dets = [uniform_lop_det(model, reduced, Frequency(1.0, g, (-1.0,))).abs_det for g in (1e-2, 1e-3, 1e-4)]
    decreasing = all(a > b for a, b in zip(dets, dets[1:]))
    passed = scan.verdict is Verdict.WEAK_ONLY and dets[-1] < 0.1 and decreasing
    return passed, {"verdict": scan.verdict.value, "dets": dets, "minAbsDet": scan.min_abs_det}


def badinceg_fails_weak(ctx: Context):
    model = load_builtin("badinceg", a=1.0, b=-1.0)
    reduced = reduce(model)
    root = Frequency(0.5, math.sqrt(3) / 2, (-1.0,)).hat
    det = uniform_lop_det(model, reduced, root).abs_det
    scan = scan_uniform(model, reduced, points=ctx.points, jobs=ctx.jobs)
    witness = scan.refined_witness.as_dict() if scan.refined_witness else None
    passed = det < 1e-8 and scan.verdict is Verdict.FAILS_WEAK
    return passed, {"absDetAtRoot": det, "verdict": scan.verdict.value, "witness": witness}


def inceg_uniform(ctx: Context):
    model = load_builtin("inceg")
    scan = scan_uniform(model, points=ctx.points, jobs=ctx.jobs)
    passed = scan.verdict is Verdict.UNIFORM and scan.min_abs_det >= 1e-3 and scan.lopsat_consistent
    return passed, {
        "verdict": scan.verdict.value,
        "minAbsDet": scan.min_abs_det,
        "lopsatConsistent": scan.lopsat_consistent,
    }


def rao_semisimplicity(ctx: Context):
    model = load_builtin("rao")
    meta = model.metadata
    energy = np.asarray(meta["energyMatrix"])
    energy_inv = np.asarray(meta["energyMatrixInverse"])
    inverse_ok = bool(np.abs(energy @ energy_inv - np.eye(4)).max() < 1e-12)
    a0 = tangential_system(model).A0coef
    boundary_det = float(abs(np.linalg.det(a0)))
    flowing = semisimple_constmult_scan(model, points=ctx.points // 2, jobs=ctx.jobs)
    still = semisimple_constmult_scan(load_builtin("rao", u=0.0), points=ctx.points // 2, jobs=ctx.jobs)
    passed = (
        meta["supersonic"]
        and abs(meta["soundSpeed"] - math.sqrt(5 / 3)) < 1e-12
        and inverse_ok
        and boundary_det > 1e-10
        and flowing.semisimple
        and not still.semisimple
    )
    return passed, {
        "soundSpeed": meta["soundSpeed"],
        "boundaryDeterminant": boundary_det,
        "expectedDeterminant": meta["boundaryDeterminant"],
        "energyInverseOk": inverse_ok,
        "semisimpleAtU1": flowing.semisimple,
        "semisimpleAtU0": still.semisimple,
    }


# --- boundary Cauchy method -----------------------------------------------


def eg2_method_two(ctx: Context):
    model = load_builtin("eg2", alpha=1.0, beta=2.0)
    reduced = reduce(model)
    rng = ctx.rng(4)
    worst = 0.0
    for _ in range(20):
        z = hemisphere_point(float(rng.uniform(0.05, 1.0)), float(rng.uniform(0, 2 * np.pi)), 2)
        eigs = np.linalg.eigvals(enlarged_frozen_generators(model, z, reduced)[0])
        eigs = eigs[np.argsort(eigs.real)]
        worst = max(worst, float(np.abs(eigs - np.array([0.0, 0.0, 1.0])).max()))
    diag = semisimple_constmult_scan(model, reduced, points=ctx.points // 2, jobs=ctx.jobs)
    res = resolvent_norm_scan(model, reduced, resolution=2 if ctx.quick else 4)
    lopver = abs(lopver_quantity(model, Frequency(-1 / math.sqrt(2), 1e-6, (1 / math.sqrt(2),)), reduced))
    passed = (
        worst < 1e-10
        and diag.semisimple
        and diag.constant_multiplicity
        and res.stable
        # the quantity equals γ exactly on this line
        and lopver <= 1e-6 * (1 + 1e-9)
    )
    return passed, {
        "eigenvalueError": worst,
        "semisimple": diag.semisimple,
        "constantMultiplicity": diag.constant_multiplicity,
        "resolventConstant": res.constant,
        "refinedResolventConstant": res.refined_constant,
        "lopver": lopver,
    }


def neueg2_method_two(ctx: Context):
    model = load_builtin("neueg2", alpha=0.3)
    reduced = reduce(model)
    diag = semisimple_constmult_scan(model, reduced, points=ctx.points // 2, jobs=ctx.jobs)
    res = resolvent_norm_scan(model, reduced, resolution=2 if ctx.quick else 4, eta_floor=ETA_FLOOR)
    scan = scan_uniform(model, reduced, points=ctx.points, jobs=ctx.jobs)
    method_two = (
        diag.evolutionary
        and diag.off_axis_semisimple
        and diag.off_axis_constant_multiplicity
        and res.stable
    )
    passed = method_two and scan.verdict is Verdict.WEAK_ONLY
    return passed, {
        "evolutionary": diag.evolutionary,
        "offAxisSemisimple": diag.off_axis_semisimple,
        "offAxisConstantMultiplicity": diag.off_axis_constant_multiplicity,
        "pureImaginary": diag.pure_imaginary,
        "resolventStable": res.stable,
        "verdict": scan.verdict.value,
    }


def sharp_resolvent_agreement() -> dict[str, dict]:
    """Sharp scalar verdict against the resolvent scan on every single-Neumann builtin."""
    out = {}
    for builtin in registry():
        model = load_builtin(builtin.name)
        try:
            reduced = reduce(model)
            sharp = sharp_scalar_condition(model, reduced)
        except (WrongShape, TransversalityFailure):
            continue
        scan = resolvent_norm_scan(model, reduced)
        out[builtin.name] = {"sharp": sharp.passed, "resolvent": scan.stable}
    return out


def noest_divergence(ctx: Context):
    model = load_builtin("noest", theta=0.5, alpha=0.0)
    reduced = reduce(model)
    diag = semisimple_constmult_scan(model, reduced, points=ctx.points // 2, jobs=ctx.jobs)
    sharp = sharp_scalar_condition(model, reduced)
    witnesses = diag.witnesses.get("semisimple", [])
    agreement = sharp_resolvent_agreement()
    agrees = all(v["sharp"] == v["resolvent"] for v in agreement.values())
    passed = not diag.semisimple and len(witnesses) >= 1 and sharp.passed and agrees
    return passed, {
        "semisimple": diag.semisimple,
        "witness": witnesses[0].zeta0.as_dict() if witnesses else None,
        "sharpMinimum": sharp.minimum,
        "sharpResolventAgreement": agreement,
    }


# --- Evans and resolvent --------------------------------------------------


def evans_degeneracy(ctx: Context):
    details, passed = {}, True
    for name in ("inceg", "scalar1d"):
        report, _ = evans_study(
            load_builtin(name), radii=4 if ctx.quick else 6, points=8 if ctx.quick else 16, jobs=ctx.jobs
        )
        s = report.summary
        ok = (
            s.minRatio > 0
            and s.refinementStable
            and abs(s.gammaRaySlope - 1.0) <= 0.1
            and s.vanishes
            and (s.ratioBand is None or s.ratioBand <= 1e3)
        )
        passed &= ok
        details[name] = s.model_dump()
    return passed, details


def resolvent_estimate(ctx: Context):
    details, passed = {}, True
    for name in ("inceg", "scalar1d"):
        model = load_builtin(name)
        zetas = small_ball_samples(model.d, 200, 0.05, ctx.rng(9))
        c1, _ = resolvent_estimate_constant(model, zetas[:100])
        c2, where = resolvent_estimate_constant(model, zetas)
        ok = bool(np.isfinite(c2) and c2 <= STABLE_RATIO * c1)
        passed &= ok
        details[name] = {"constant": c1, "doubledConstant": c2, "witness": where.as_dict() if where else None}
    return passed, details


# --- viscous limits -------------------------------------------------------


def scalar_convergence(ctx: Context):
    report, _ = convergence_study(load_builtin("scalar1d"), ctx.epsilons, jobs=ctx.jobs)
    passed = abs(report.supSlope - 1.0) <= 0.2 and abs(report.l2Slope - 2.0) <= 0.3
    return passed, {"supSlope": report.supSlope, "l2Slope": report.l2Slope}


def fornet_convergence(ctx: Context):
    diffs = []
    for e in ctx.epsilons:
        diffs.append(fornet_solve(1.0, 2.0, e, Grid.layer_resolving(e, 8.0, 2.0)).l2_difference)
    slope = fitted_slope(ctx.epsilons, diffs)
    decreasing = all(a > b for a, b in zip(diffs, diffs[1:]))
    symmetric = fornet_solve(1.0, 1.0, 0.1, Grid.layer_resolving(0.1, 8.0, 2.0)).viscous.solution.values
    asymmetry = float(np.abs(symmetric[..., 0] - symmetric[..., 1]).max())
    passed = decreasing and slope > 0.4 and asymmetry < 1e-10
    return passed, {"l2Differences": diffs, "slope": slope, "asymmetry": asymmetry}


def weighted_estimate(ctx: Context):
    result = weighted_study(load_builtin("scalar1d"), epsilon=0.1)
    return result["stable"], result


# --- cascade --------------------------------------------------------------


def cascade_orders(ctx: Context):
    model = load_builtin("scalar1d")
    details, passed = {}, True
    coarse, _ = expansion_study(model, order=2, dx=0.04, epsilons=ctx.epsilons)
    fine, _ = expansion_study(model, order=2, dx=0.02, epsilons=ctx.epsilons)
    for j in (0, 1):
        tc, tf = coarse.traces[j], fine.traces[j]
        ok = tf <= 1e-8 or tc / tf >= 2.0**1.5
        passed &= ok
        details[f"trace{j}"] = {"coarse": tc, "fine": tf}
    for m in (1, 2):
        report, _ = expansion_study(model, order=m, epsilons=ctx.epsilons)
        ok = abs(report.residualSlope - m) <= 0.3
        passed &= ok
        details[f"residualSlopeM{m}"] = report.residualSlope
    return passed, details


# --- property suites ------------------------------------------------------


def projector_identities(rng: np.random.Generator, trials: int = 100, n: int = 6) -> float:
    worst = 0.0
    for _ in range(trials):
        m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        split = spectral_split(m)
        p, q = split.pi_plus, split.pi_minus
        scale = 1.0 + np.linalg.norm(p) ** 2
        worst = max(
            worst,
            np.linalg.norm(p @ p - p) / scale,
            np.linalg.norm(p @ q) / scale,
            np.linalg.norm(m @ p - p @ m) / (scale * np.linalg.norm(m)),
        )
    return float(worst)


def unitary_invariance(rng: np.random.Generator, trials: int = 100, n: int = 5) -> float:
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, n))
        b1 = SubspaceBasis.from_columns(rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k)))
        b2 = SubspaceBasis.from_columns(rng.normal(size=(n, n - k)) + 1j * rng.normal(size=(n, n - k)))
        u, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        before = abs(subspace_det(b1, b2))
        after = abs(subspace_det(SubspaceBasis(n, u @ b1.basis), SubspaceBasis(n, u @ b2.basis)))
        worst = max(worst, abs(before - after))
    return float(worst)


def random_ast(rng: np.random.Generator, n_vars: int, depth: int = 4):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return Const(float(rng.integers(0, 40)) / 8)
        return Var(int(rng.integers(0, n_vars)))
    kind = rng.integers(0, 6)
    if kind == 0:
        return Neg(random_ast(rng, n_vars, depth - 1))
    if kind == 1:
        return Call(str(rng.choice(["sin", "cos", "exp", "sqrt"])), random_ast(rng, n_vars, depth - 1))
    if kind == 2:
        return BinOp("^", random_ast(rng, n_vars, depth - 1), Const(float(rng.integers(0, 4))))
    op = str(rng.choice(["+", "-", "*", "/"]))
    return BinOp(op, random_ast(rng, n_vars, depth - 1), random_ast(rng, n_vars, depth - 1))


def parser_roundtrip(rng: np.random.Generator, trials: int = 1000, n_vars: int = 3) -> int:
    """Number of trials where reparsing or evaluation disagreed."""
    failures = 0
    for _ in range(trials):
        node = random_ast(rng, n_vars)
        if parse_expr(to_text(node), n_vars) != node:
            failures += 1
            continue
        state = rng.uniform(-2.0, 2.0, size=n_vars)
        try:
            expected = evaluate_reference(node, state)
        except ModelError:
            try:
                compile_expr(node)(state)
            except ModelError:
                continue
            failures += 1
            continue
        got = compile_expr(node)(state)
        if not np.isclose(got, expected, rtol=1e-12, atol=1e-12, equal_nan=True):
            failures += 1
    return failures


def deterministic_rerun(jobs: int = 1) -> bool:
    model = load_builtin("inceg")
    outputs = []
    for k in (1, max(jobs, 2)):
        report, rows = stability_study(model, points=8, gamma_levels=[0.0, 0.5, 1.0], jobs=k, cauchy=False)
        outputs.append((csv_text(STABILITY_COLUMNS, rows), report_json(report)))
    return outputs[0] == outputs[1]


def property_suites(ctx: Context):
    projector = projector_identities(ctx.rng(14))
    unitary = unitary_invariance(ctx.rng(15))
    parser = parser_roundtrip(ctx.rng(16))
    rerun = deterministic_rerun(ctx.jobs)
    passed = projector < 1e-8 and unitary < 1e-10 and parser == 0 and rerun
    return passed, {
        "projectorResidual": projector,
        "unitaryResidual": unitary,
        "parserFailures": parser,
        "deterministic": rerun,
    }


CRITERIA: list[Criterion] = [
    Criterion(1, "stability", "neueg is weakly but not uniformly stable", neueg_weak_only),
    Criterion(2, "stability", "badinceg fails the weak Lopatinski condition", badinceg_fails_weak),
    Criterion(3, "stability", "inceg is uniformly stable", inceg_uniform),
    Criterion(4, "cauchy", "eg2 boundary Cauchy diagnostics", eg2_method_two),
    Criterion(5, "cauchy", "neueg2 boundary Cauchy method despite WEAK_ONLY", neueg2_method_two),
    Criterion(6, "cauchy", "noest: Jordan block with a passing sharp condition", noest_divergence),
    Criterion(7, "stability", "rao supersonic inflow and Jordan block at u = 0", rao_semisimplicity),
    Criterion(8, "evans", "Evans degeneracy R ~ γ + ρ²", evans_degeneracy),
    Criterion(9, "resolvent", "low-frequency resolvent estimate", resolvent_estimate),
    Criterion(10, "converge", "scalar1d small-viscosity rates", scalar_convergence),
    Criterion(11, "converge", "fornet L2 convergence", fornet_convergence),
    Criterion(12, "converge", "weighted estimate constant", weighted_estimate),
    Criterion(13, "expand", "quasilinear cascade traces and residual orders", cascade_orders),
    Criterion(14, "property", "property suites and determinism", property_suites),
]


def run_criterion(criterion: Criterion, ctx: Context) -> CriterionResult:
    start = time.perf_counter()
    error = None
    try:
        passed, details = criterion.check(ctx)
    except LabError as exc:
        logger.warning("criterion %d raised %s: %s", criterion.number, type(exc).__name__, exc)
        passed, details, error = False, {}, f"{type(exc).__name__}: {exc}"
    seconds = time.perf_counter() - start
    logger.info("criterion %d (%s): %s in %.1fs", criterion.number, criterion.tag, "PASS" if passed else "FAIL", seconds)
    return CriterionResult(
        number=criterion.number,
        tag=criterion.tag,
        title=criterion.title,
        passed=bool(passed),
        seconds=round(seconds, 3),
        details=details,
        error=error,
    )


def run_acceptance(
    only: set[str] | None = None, quick: bool = False, seed: int = 0, jobs: int = 1
) -> AcceptanceReport:
    unknown = (only or set()) - set(TAGS)
    if unknown:
        raise ModelError(f"unknown acceptance tag(s) {sorted(unknown)}; known: {', '.join(TAGS)}")
    ctx = Context(quick, seed, jobs)
    selected = [c for c in CRITERIA if not only or c.tag in only]
    results = [run_criterion(c, ctx) for c in selected]
    return AcceptanceReport(
        quick=quick,
        seed=seed,
        options={"only": sorted(only) if only else None, "jobs": jobs},
        passed=all(r.passed for r in results),
        criteria=results,
    )
