"""Scans and studies behind the CLI commands and the HTTP routers.

Each study returns a pydantic report together with the CSV rows of its table.
"""

import logging

import numpy as np

from app.analysis.cauchy import (
    ETA_FLOOR,
    CauchyDiagnostics,
    ResolventScan,
    cauchy_diagnostics,
    eta_directions,
    tangential_system,
)
from app.analysis.expansion import (
    composite_residual,
    layer_profile_first_order,
    next_order_terms,
    order_zero_mixed_reduction,
    quasilinear_incoming_expansion,
    solve_filtered_outer,
)
from app.analysis.fields import DiscreteField, Grid
from app.analysis.frequency import Frequency, hemisphere_grid
from app.analysis.lopatinski import Case, classify_case, glancing_detector, reduce, scan_uniform
from app.analysis.solvers import (
    Scheme,
    fornet_limit,
    gaussian_bump,
    viscous_solve_1d,
    weighted_ratios,
)
from app.analysis.symbols import degeneracy_R, evans
from app.core.errors import NumericError
from app.core.parallel import fan_out
from app.models.hp_model import HyperbolicParabolicModel
from app.schemas.report import (
    CauchySummary,
    ConvergenceReport,
    ConvergenceRow,
    EvansReport,
    EvansSummary,
    ExpansionReport,
    ExpansionRow,
    FrequencyOut,
    GlancingOut,
    LopatinskiSummary,
    ResolventOut,
    StabilityReport,
    WitnessOut,
)

logger = logging.getLogger("app.analysis.studies")

STABILITY_COLUMNS = [
    "level", "index", "tau", "gamma", "eta1", "eta2",
    "absDet", "reDet", "imDet", "minSingular", "wellCond", "glancing", "kernelDim", "error",
]
EVANS_COLUMNS = ["tau", "gamma", "eta1", "eta2", "rho", "absD", "R", "ratio", "absDefinitional", "absEvansRatio"]
EXPANSION_COLUMNS = ["epsilon", "order", "residual"]
CONVERGENCE_COLUMNS = ["epsilon", "dx", "dt", "supError", "l2Error", "newtonIterations"]

DEFAULT_EPSILONS = [0.1, 0.05, 0.025, 0.0125]
EVANS_LEVELS = [0.0, 0.1, 0.3, 0.6, 1.0]
STABLE_RATIO = 1.5


def fitted_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def _freq(z: Frequency | None) -> FrequencyOut | None:
    return None if z is None else FrequencyOut(**z.as_dict())


def _eta(z: Frequency, k: int) -> float | None:
    return z.eta[k] if len(z.eta) > k else None


# --- stability ------------------------------------------------------------


def _resolvent(scan: ResolventScan | None) -> ResolventOut | None:
    if scan is None:
        return None
    return ResolventOut(
        constant=scan.constant,
        refinedConstant=scan.refined_constant,
        stable=scan.stable,
        gammaExponent=scan.gamma_exponent,
        witness=_freq(scan.witness),
    )


def glancing_locations(model: HyperbolicParabolicModel, directions: int = 8) -> list[GlancingOut]:
    """Glancing points over unit tangential directions; empty for d = 1."""
    if model.d < 2:
        return []
    return [
        GlancingOut(tau=p.tau, eta=list(p.eta), xi=p.xi)
        for eta in eta_directions(model.d, directions)
        for p in glancing_detector(model, eta)
    ]


def cauchy_summary(model: HyperbolicParabolicModel, diag: CauchyDiagnostics, reduced) -> CauchySummary:
    try:
        a0 = tangential_system(model, reduced).A0coef
        boundary_det = float(abs(np.linalg.det(a0))) if a0.shape[0] == a0.shape[1] else None
    except NumericError:
        boundary_det = None
    sharp = min((abs(v) for v in diag.sharp_scalar.values()), default=None)
    return CauchySummary(
        evolutionary=diag.evolutionary,
        weaklyHyperbolic=diag.weakly_hyperbolic,
        semisimple=diag.semisimple,
        constantMultiplicity=diag.constant_multiplicity,
        pureImaginary=diag.pure_imaginary,
        offAxisSemisimple=diag.off_axis_semisimple,
        offAxisConstantMultiplicity=diag.off_axis_constant_multiplicity,
        offAxisPureImaginary=diag.off_axis_pure_imaginary,
        multiplicityPatterns=[list(p) for p in diag.multiplicity_patterns],
        witnesses={
            flag: [WitnessOut(zeta0=_freq(w.zeta0), eta=list(w.eta), detail=w.detail) for w in ws[:5]]
            for flag, ws in diag.witnesses.items()
        },
        points=diag.points,
        failedPoints=diag.failed_points,
        resolventConstant=diag.resolvent_constant,
        sharpScalarMin=sharp,
        blockResolvent=_resolvent(diag.block_resolvent),
        boundaryDeterminant=boundary_det,
    )


def stability_study(
    model: HyperbolicParabolicModel,
    points: int | None = None,
    gamma_levels: list[float] | None = None,
    jobs: int = 1,
    cauchy: bool = True,
) -> tuple[StabilityReport, list[dict]]:
    """Uniform Lopatinski scan plus, for case (ii) in d ≥ 2, the boundary Cauchy diagnostics."""
    cls = classify_case(model)
    summary = LopatinskiSummary(case=cls.case.value, D=cls.D, Nn=cls.Nn, incoming=cls.I, outgoing=cls.O)
    summary.glancing = glancing_locations(model)
    rows: list[dict] = []
    reduced = None
    try:
        reduced = reduce(model)
        scan = scan_uniform(model, reduced, points=points, gamma_levels=gamma_levels, jobs=jobs)
    except NumericError as exc:
        logger.warning("lopatinski scan of %s failed: %s", model.name, exc)
        summary.error = f"{type(exc).__name__}: {exc}"
    else:
        summary.verdict = scan.verdict.value
        summary.minAbsDet = scan.min_abs_det
        summary.argmin = _freq(scan.argmin)
        summary.minPositiveAbsDet = scan.min_positive_abs_det
        summary.refinedMin = scan.refined_min
        summary.witness = _freq(scan.refined_witness)
        summary.lopsatConsistent = scan.lopsat_consistent
        summary.maxWellCond = scan.max_well_cond
        summary.glancingPoints = len(scan.glancing_points)
        summary.failedPoints = scan.failed
        for r in scan.records:
            rows.append(
                {
                    "level": r.level,
                    "index": r.index,
                    "tau": r.zeta.tau,
                    "gamma": r.zeta.gamma,
                    "eta1": _eta(r.zeta, 0),
                    "eta2": _eta(r.zeta, 1),
                    "absDet": r.abs_det if r.error is None else None,
                    "reDet": r.det_uniform.real if r.error is None else None,
                    "imDet": r.det_uniform.imag if r.error is None else None,
                    "minSingular": r.min_singular if r.error is None else None,
                    "wellCond": r.well_cond if r.error is None else None,
                    "glancing": r.glancing,
                    "kernelDim": r.kernel_dim,
                    "error": r.error,
                }
            )

    report = StabilityReport(
        model=model.name,
        params=model.params,
        options={"points": points, "gammaLevels": gamma_levels},
        lopatinski=summary,
        metadata={k: v for k, v in model.metadata.items() if not isinstance(v, list)},
    )
    if cauchy and model.d >= 2 and cls.case is not Case.CASE_I and reduced is not None:
        try:
            diag = cauchy_diagnostics(model, reduced, eta_floor=ETA_FLOOR, jobs=jobs)
            report.cauchy = cauchy_summary(model, diag, reduced)
        except NumericError as exc:
            logger.warning("boundary Cauchy diagnostics of %s failed: %s", model.name, exc)
            report.cauchyError = f"{type(exc).__name__}: {exc}"
    return report, rows


# --- Evans ----------------------------------------------------------------


def _evans_samples(d: int, radius: float, radii: int, points: int) -> list[Frequency]:
    directions = [z for _, _, z in hemisphere_grid(d, points, EVANS_LEVELS)]
    out = []
    for r in np.logspace(-3, np.log10(radius), radii):
        out.extend(z.scaled(float(r)) for z in directions)
    return out


def _evans_row(model: HyperbolicParabolicModel, z: Frequency) -> dict | None:
    try:
        value = evans(model, z)
        r = degeneracy_R(model, z)
    except NumericError as exc:
        logger.debug("evans point %s skipped: %s", z, exc)
        return None
    return {
        "tau": z.tau,
        "gamma": z.gamma,
        "eta1": _eta(z, 0),
        "eta2": _eta(z, 1),
        "rho": z.rho,
        "absD": abs(value.det_h),
        "R": r,
        "ratio": r / (z.gamma + z.rho**2),
        "absDefinitional": None if value.definitional is None else abs(value.definitional),
        "absEvansRatio": None if value.ratio is None else abs(value.ratio),
    }


def gamma_ray_slope(model: HyperbolicParabolicModel, gammas=None) -> float:
    """Slope of log R against log γ along τ = η = 0."""
    gammas = np.logspace(-4, -2, 9) if gammas is None else np.asarray(gammas)
    zero_eta = (0.0,) * (model.d - 1)
    rs = [degeneracy_R(model, Frequency(0.0, float(g), zero_eta)) for g in gammas]
    return fitted_slope(gammas, rs)


def evans_study(
    model: HyperbolicParabolicModel,
    radius: float = 0.05,
    radii: int = 6,
    points: int = 16,
    jobs: int = 1,
) -> tuple[EvansReport, list[dict]]:
    """R(ζ)/(γ + ρ²) over 0 < ρ ≤ radius, at the requested and at doubled resolution."""
    coarse = _evans_samples(model.d, radius, radii, points)
    fine = _evans_samples(model.d, radius, 2 * radii, 2 * points)
    rows_c = fan_out(lambda z: _evans_row(model, z), coarse, jobs)
    rows_f = fan_out(lambda z: _evans_row(model, z), fine, jobs)
    rows = [r for r in rows_c if r is not None]
    rows_fine = [r for r in rows_f if r is not None]
    if not rows or not rows_fine:
        raise NumericError(f"no Evans sample of {model.name} could be evaluated")
    min_c = min(r["ratio"] for r in rows)
    min_f = min(r["ratio"] for r in rows_fine)

    ray = Frequency(0.0, 1.0, (0.0,) * (model.d - 1))
    near = abs(evans(model, ray.scaled(1e-3)).det_h)
    far = abs(evans(model, ray.scaled(1e-1)).det_h)
    ratios = [r["absEvansRatio"] for r in rows if r["absEvansRatio"]]
    band = max(ratios) / min(ratios) if ratios else None

    summary = EvansSummary(
        rows=len(rows),
        skipped=len(rows_c) - len(rows),
        minRatio=min_c,
        refinedMinRatio=min_f,
        refinementStable=bool(min_f > 0 and min_c <= STABLE_RATIO * min_f),
        gammaRaySlope=gamma_ray_slope(model),
        vanishes=bool(near < far),
        ratioBand=band,
    )
    logger.info(
        "evans scan %s: %d rows, min R/(γ+ρ²) %.4g (refined %.4g), ray slope %.3f",
        model.name, len(rows), min_c, min_f, summary.gammaRaySlope,
    )
    report = EvansReport(
        model=model.name,
        params=model.params,
        options={"radius": radius, "radii": radii, "points": points},
        summary=summary,
    )
    return report, rows


# --- expansion ------------------------------------------------------------


def cubic_forcing(grid: Grid, n: int, mode: float = 0.0) -> DiscreteField:
    """f = t³e^{−x} in every component."""
    dtype = complex if mode else float
    return DiscreteField.from_function(
        grid,
        lambda t, x: np.repeat((t**3 * np.exp(-x))[..., None], n, axis=-1).astype(dtype),
        "f",
        mode,
    )


def expansion_study(
    model: HyperbolicParabolicModel,
    order: int = 1,
    epsilons: list[float] | None = None,
    X: float = 6.0,
    T: float = 1.0,
    dx: float = 0.02,
    mode: float = 1.0,
) -> tuple[ExpansionReport, list[dict]]:
    """Quasilinear cascade for totally incoming d = 1 models, the filtered linear pipeline otherwise.

    ``order`` is the number of retained profiles; 0 keeps the outer solution only.
    """
    epsilons = DEFAULT_EPSILONS if epsilons is None else epsilons
    grid = Grid.uniform(X, T, dx)
    options = {"X": X, "T": T, "dx": dx, "epsilons": epsilons}

    if model.d == 1 and model.totally_incoming:
        m = max(order, 1)
        f = cubic_forcing(grid, model.N)
        profile = quasilinear_incoming_expansion(model, f, M=m)
        rows = [
            {"epsilon": e, "order": m, "residual": composite_residual(model, profile.composite(e), f, e)}
            for e in epsilons
        ]
        report = ExpansionReport(
            model=model.name,
            params=model.params,
            options=options,
            pipeline="cascade",
            order=m,
            grid=grid.as_dict(),
            traces=profile.traces,
            residualSlope=fitted_slope(epsilons, [r["residual"] for r in rows]),
            rows=[ExpansionRow(**r) for r in rows],
        )
        return report, rows

    f = cubic_forcing(grid, model.N, mode if model.d == 2 else 0.0)
    outer = solve_filtered_outer(model, f)
    report = ExpansionReport(
        model=model.name,
        params=model.params,
        options={**options, "mode": f.mode},
        pipeline="filtered",
        order=order,
        grid=grid.as_dict(),
        traces=[float(np.abs(outer.u0.normal_trace()).max())],
        outerResidual=outer.residual_l2,
    )
    if model.n_dirichlet:
        mixed = order_zero_mixed_reduction(model)
        report.options["case"] = mixed.case.value
    if order >= 1:
        layer = layer_profile_first_order(model, outer.u0)
        report.layer = {**layer.as_dict(), "decays": layer.decay_holds()}
        if order >= 2:
            report.nextOrderResidual = next_order_terms(model, outer.u0, layer).residual_l2
    return report, []


# --- convergence ----------------------------------------------------------


def _neumann_run(model, epsilon, X, T, per_epsilon, scheme) -> dict:
    grid = Grid.layer_resolving(epsilon, X, T, per_epsilon)
    f = cubic_forcing(grid, model.N)
    run = viscous_solve_1d(model, epsilon, f, scheme)
    profile = quasilinear_incoming_expansion(model, f, M=2)
    u0 = profile.outer[0]
    return {
        "epsilon": epsilon,
        "dx": grid.dx,
        "dt": grid.dt,
        "supError": (run.solution - u0).sup_norm(),
        "l2Error": (run.solution - profile.composite(epsilon, 2)).l2_norm(),
        "newtonIterations": run.newton_iterations + profile.newton_iterations,
    }


def bump_data(grid: Grid, n: int) -> np.ndarray:
    bump = gaussian_bump(grid.x)
    return np.repeat(bump[:, None], n, axis=1)


def _limit_run(model, epsilon, X, T, per_epsilon, scheme) -> dict:
    grid = Grid.layer_resolving(epsilon, X, T, per_epsilon)
    f = DiscreteField.zeros(grid, model.N, name="f")
    initial = bump_data(grid, model.N)
    run = viscous_solve_1d(model, epsilon, f, scheme, initial)
    diff = run.solution - fornet_limit(model, f, initial)
    return {
        "epsilon": epsilon,
        "dx": grid.dx,
        "dt": grid.dt,
        "supError": diff.sup_norm(),
        "l2Error": diff.l2_norm(),
        "newtonIterations": run.newton_iterations,
    }


def weighted_study(
    model: HyperbolicParabolicModel,
    epsilon: float = 0.1,
    X: float = 6.0,
    T: float = 1.0,
    per_epsilon: int = 8,
    gammas=(2.0, 4.0, 8.0, 16.0),
) -> dict:
    """|u|_γ/(γ⁻¹|f|_γ + γ⁻²|∂_x f|_γ) at two resolutions."""
    maxima = []
    table = {}
    for k in (per_epsilon, 2 * per_epsilon):
        grid = Grid.layer_resolving(epsilon, X, T, k)
        f = cubic_forcing(grid, model.N)
        ratios = weighted_ratios(viscous_solve_1d(model, epsilon, f).solution, f, gammas)
        table[str(k)] = {str(g): v for g, v in ratios.items()}
        maxima.append(max(ratios.values()))
    growth = max(maxima) / min(maxima) if min(maxima) > 0 else float("inf")
    return {"ratios": table, "maxima": maxima, "growth": growth, "stable": bool(growth <= STABLE_RATIO)}


def convergence_study(
    model: HyperbolicParabolicModel,
    epsilons: list[float] | None = None,
    X: float | None = None,
    T: float | None = None,
    per_epsilon: int = 8,
    scheme: Scheme = Scheme.CRANK_NICOLSON_CENTERED,
    weighted: bool = False,
    jobs: int = 1,
) -> tuple[ConvergenceReport, list[dict]]:
    """Distance between viscous solutions and their ε → 0 limit over an ε sweep.

    Pure Neumann models compare with the cascade profiles under f = t³e^{−x};
    models with Dirichlet rows start from a bump and compare with the limit
    problem of the boundary trace.
    """
    epsilons = DEFAULT_EPSILONS if epsilons is None else epsilons
    limit = model.n_dirichlet > 0
    X = (8.0 if limit else 6.0) if X is None else X
    T = (2.0 if limit else 1.0) if T is None else T
    run = _limit_run if limit else _neumann_run
    rows = fan_out(lambda e: run(model, e, X, T, per_epsilon, scheme), epsilons, jobs)

    l2 = [r["l2Error"] for r in rows]
    ordered = sorted(rows, key=lambda r: -r["epsilon"])
    monotone = all(a["l2Error"] > b["l2Error"] for a, b in zip(ordered, ordered[1:]))
    report = ConvergenceReport(
        model=model.name,
        params=model.params,
        options={"X": X, "T": T, "perEpsilon": per_epsilon, "epsilons": epsilons},
        pipeline="limit" if limit else "neumann",
        scheme=scheme.value,
        rows=[ConvergenceRow(**r) for r in rows],
        supSlope=fitted_slope(epsilons, [r["supError"] for r in rows]),
        l2Slope=fitted_slope(epsilons, l2),
        monotone=monotone,
    )
    if weighted and not limit:
        report.weighted = weighted_study(model, max(epsilons), X, T, per_epsilon)
    logger.info(
        "convergence %s: sup slope %.3f, L2 slope %.3f, monotone %s",
        model.name, report.supSlope, report.l2Slope, monotone,
    )
    return report, rows
