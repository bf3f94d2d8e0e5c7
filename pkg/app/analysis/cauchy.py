"""Boundary Cauchy problem: evolution of the boundary trace in the tangential variables.

The plain system stacks the Dirichlet rows with the reduced Neumann rows. The
enlarged system adds rows Γ₀(ζ₀) orthogonal to the decaying space, so that the
whole trace evolves; its generators are frozen at a point ζ₀ of the closed
hemisphere.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from app.analysis.frequency import Frequency, hemisphere_grid, hemisphere_point
from app.analysis.linalg import eigen_clusters, left_nullspace, multiplicity_pattern, smallest_gap
from app.analysis.lopatinski import Case, ReducedBC, reduce_case_ii, unstable_space
from app.analysis.symbols import _ad_inverse, interior_symbol
from app.core.errors import (
    NotEvolutionary,
    NotEvolutionaryAtPoint,
    NumericError,
    RankConditionFails,
    TransversalityFailure,
    WrongShape,
)
from app.core.parallel import fan_out
from app.models.hp_model import HyperbolicParabolicModel

logger = logging.getLogger("app.analysis.cauchy")

EVOLUTION_TOL = 1e-10
REAL_ROOT_TOL = 1e-8
IMAG_TOL = 1e-8
ETA_FLOOR = 1e-2
FROZEN_LEVELS = [0.0, 0.1, 0.3, 0.6, 0.9]


@dataclass(frozen=True)
class TangentialSystem:
    A0coef: np.ndarray
    Ajcoefs: list[np.ndarray]
    frozen_at: Frequency | None = None
    enlarged: bool = False

    @property
    def size(self) -> int:
        return self.A0coef.shape[0]


def _require_case_ii(model: HyperbolicParabolicModel, reduced: ReducedBC | None) -> ReducedBC:
    reduced = reduce_case_ii(model) if reduced is None else reduced
    if reduced.classification.case is Case.CASE_I:
        raise TransversalityFailure("the boundary Cauchy system needs a case (ii) reduction")
    return reduced


def tangential_system(model: HyperbolicParabolicModel, reduced: ReducedBC | None = None) -> TangentialSystem:
    """B = (Γ₁; −Γ̃₂A_d⁻¹)∂_t + Σ_j (0; −Γ̃₂A_d⁻¹A_j)∂_j."""
    reduced = _require_case_ii(model, reduced)
    neumann = -reduced.gamma_tilde2 @ _ad_inverse(model)
    top = model.gamma1
    a0 = np.vstack([top, neumann])
    zeros = np.zeros_like(top)
    aj = [np.vstack([zeros, neumann @ a]) for a in model.tangential]
    return TangentialSystem(a0, aj)


def gamma0_rows(model: HyperbolicParabolicModel, zeta0: Frequency) -> np.ndarray:
    """Orthonormal rows annihilating 𝔼₊ of the Lopatinski symbol at ζ₀."""
    e_plus, _ = unstable_space(model, zeta0)
    if e_plus.dim == model.N:
        return np.zeros((0, model.N), dtype=complex)
    return left_nullspace(e_plus.basis)


def enlarged_system(
    model: HyperbolicParabolicModel, zeta0: Frequency, reduced: ReducedBC | None = None
) -> TangentialSystem:
    """𝒜₀ = (Γ₀; Γ₁; Γ̃₂A_d⁻¹) and 𝒜_j = (0; 0; Γ̃₂A_d⁻¹A_j)."""
    reduced = _require_case_ii(model, reduced)
    g0 = gamma0_rows(model, zeta0)
    neumann = reduced.gamma_tilde2 @ _ad_inverse(model)
    a0 = np.vstack([g0, model.gamma1.astype(complex), neumann.astype(complex)])
    upper = np.zeros((g0.shape[0] + model.gamma1.shape[0], model.N), dtype=complex)
    aj = [np.vstack([upper, neumann @ a]) for a in model.tangential]
    if a0.shape[0] != model.N:
        raise NotEvolutionaryAtPoint(f"enlarged system has {a0.shape[0]} rows for N = {model.N} at {zeta0}")
    return TangentialSystem(a0, aj, frozen_at=zeta0, enlarged=True)


def evolutionary_check(ts: TangentialSystem, tol: float = EVOLUTION_TOL) -> tuple[bool, float]:
    a0 = ts.A0coef
    if a0.shape[0] != a0.shape[1]:
        return False, np.inf
    s = np.linalg.svd(a0, compute_uv=False)
    ok = bool(s[-1] > tol * s[0])
    return ok, float(s[0] / s[-1]) if s[-1] > 0 else np.inf


@dataclass
class WeakHyperbolicity:
    evolutionary: bool
    weakly_hyperbolic: bool
    roots_by_eta: dict[tuple[float, ...], list[complex]]
    condition: float


def eta_directions(d: int, count: int = 32) -> list[tuple[float, ...]]:
    if d <= 1:
        return [()]
    if d == 2:
        return [(1.0,), (-1.0,)]
    phi = 2 * np.pi * np.arange(count) / count
    return [(float(np.cos(p)), float(np.sin(p))) for p in phi]


def weak_hyperbolicity_check(ts: TangentialSystem, eta_grid: list[tuple[float, ...]]) -> WeakHyperbolicity:
    """Roots in τ of det(A0coef·τ + Σ Ajcoef·η_j) = 0 must be real."""
    ok, cond = evolutionary_check(ts)
    if not ok:
        raise NotEvolutionary(f"coefficient of ∂_t is singular (condition {cond:.3e})")
    a0_inv = np.linalg.inv(ts.A0coef)
    roots = {}
    real = True
    for eta in eta_grid:
        m = sum((e * a for e, a in zip(eta, ts.Ajcoefs)), np.zeros_like(ts.A0coef, dtype=complex))
        values = np.linalg.eigvals(-a0_inv @ m)
        scale = max(1.0, float(np.abs(values).max()) if values.size else 1.0)
        if values.size and np.abs(values.imag).max() > REAL_ROOT_TOL * scale:
            real = False
        roots[tuple(eta)] = sorted((complex(v) for v in values), key=lambda z: (z.real, z.imag))
    return WeakHyperbolicity(True, real, roots, cond)


def enlarged_frozen_generators(
    model: HyperbolicParabolicModel, zeta0: Frequency, reduced: ReducedBC | None = None
) -> list[np.ndarray]:
    ts = enlarged_system(model, zeta0, reduced)
    ok, cond = evolutionary_check(ts)
    if not ok:
        raise NotEvolutionaryAtPoint(f"𝒜₀ is singular at {zeta0} (condition {cond:.3e})")
    a0_inv = np.linalg.inv(ts.A0coef)
    return [a0_inv @ a for a in ts.Ajcoefs]


@dataclass
class Witness:
    zeta0: Frequency
    eta: tuple[float, ...]
    detail: str


@dataclass
class CauchyDiagnostics:
    evolutionary: bool = True
    weakly_hyperbolic: bool = True
    semisimple: bool = True
    constant_multiplicity: bool = True
    pure_imaginary: bool = True
    off_axis_semisimple: bool = True
    off_axis_constant_multiplicity: bool = True
    off_axis_pure_imaginary: bool = True
    multiplicity_patterns: list[tuple[int, ...]] = field(default_factory=list)
    roots_by_eta: dict = field(default_factory=dict)
    witnesses: dict[str, list[Witness]] = field(default_factory=dict)
    points: int = 0
    failed_points: int = 0
    resolvent_constant: float | None = None
    sharp_scalar: dict = field(default_factory=dict)
    block_resolvent: "ResolventScan | None" = None

    def witness(self, flag: str, w: Witness) -> None:
        self.witnesses.setdefault(flag, []).append(w)


def _generator(gens: list[np.ndarray], eta) -> np.ndarray:
    return 1j * sum(e * g for e, g in zip(eta, gens))


def _examine_point(model, reduced, zeta0: Frequency, etas):
    """Per frozen point: list of (eta, clusters, max |Re λ|) or an error."""
    try:
        gens = enlarged_frozen_generators(model, zeta0, reduced)
    except NotEvolutionaryAtPoint as exc:
        return zeta0, None, f"not evolutionary: {exc}"
    except NumericError as exc:
        return zeta0, None, f"{type(exc).__name__}: {exc}"
    out = []
    for eta in etas:
        m = _generator(gens, eta)
        clusters = eigen_clusters(m)
        re = max((abs(c.center.real) for c in clusters), default=0.0)
        out.append((eta, clusters, re))
    return zeta0, out, None


def _coalescence_points(model, reduced, levels, points) -> list[Frequency]:
    """Local minimisers of the eigenvalue gap along each γ-level arc."""
    if model.d != 2:
        return []
    found = []

    def gap(phi, g):
        try:
            gens = enlarged_frozen_generators(model, hemisphere_point(g, phi, 2), reduced)
        except NumericError:
            return np.inf
        return smallest_gap(np.linalg.eigvals(gens[0]))

    for g in levels:
        if g >= 1.0:
            continue
        phis = 2 * np.pi * np.arange(points) / points
        gaps = np.array([gap(p, g) for p in phis])
        step = phis[1] - phis[0]
        for i in range(points):
            left, right = gaps[i - 1], gaps[(i + 1) % points]
            if not np.isfinite(gaps[i]) or gaps[i] > left or gaps[i] > right:
                continue
            res = minimize_scalar(
                gap, bounds=(phis[i] - step, phis[i] + step), args=(g,),
                method="bounded", options={"xatol": 1e-13},
            )
            if np.isfinite(res.fun):
                found.append(hemisphere_point(g, float(res.x), 2))
    return found


def semisimple_constmult_scan(
    model: HyperbolicParabolicModel,
    reduced: ReducedBC | None = None,
    points: int = 32,
    gamma_levels: list[float] | None = None,
    eta_count: int = 32,
    coalescence: bool = True,
    jobs: int = 1,
) -> CauchyDiagnostics:
    reduced = _require_case_ii(model, reduced)
    diag = CauchyDiagnostics()
    levels = FROZEN_LEVELS if gamma_levels is None else gamma_levels
    etas = eta_directions(model.d, eta_count)

    plain = tangential_system(model, reduced)
    # the plain system is square only without outgoing modes; otherwise the enlarged one decides
    square = plain.A0coef.shape[0] == plain.A0coef.shape[1]
    if square:
        try:
            wh = weak_hyperbolicity_check(plain, etas)
            diag.weakly_hyperbolic = wh.weakly_hyperbolic
            diag.roots_by_eta = wh.roots_by_eta
        except NotEvolutionary:
            diag.evolutionary = False
            diag.weakly_hyperbolic = False

    if model.d == 1:
        return diag

    frozen = [z for _, _, z in hemisphere_grid(model.d, points, levels)]
    if coalescence:
        frozen += _coalescence_points(model, reduced, levels, points)
    results = fan_out(lambda z: _examine_point(model, reduced, z, etas), frozen, jobs)

    patterns: set[tuple[int, ...]] = set()
    first_pattern: tuple[int, ...] | None = None
    changed_at: tuple[Frequency, tuple[float, ...], tuple[int, ...]] | None = None
    off_axis_patterns: set[tuple[int, ...]] = set()
    for zeta0, per_eta, error in results:
        diag.points += 1
        off_axis = zeta0.eta_norm >= ETA_FLOOR
        if per_eta is None:
            diag.failed_points += 1
            if error.startswith("not evolutionary"):
                diag.evolutionary = False
                diag.witness("evolutionary", Witness(zeta0, (), error))
            else:
                logger.warning("frozen point %s skipped: %s", zeta0, error)
            continue
        for eta, clusters, re in per_eta:
            pattern = multiplicity_pattern(clusters)
            patterns.add(pattern)
            if first_pattern is None:
                first_pattern = pattern
            elif changed_at is None and pattern != first_pattern:
                changed_at = (zeta0, eta, pattern)
            if off_axis:
                off_axis_patterns.add(pattern)
            if not all(c.semisimple for c in clusters):
                diag.semisimple = False
                diag.off_axis_semisimple &= not off_axis
                diag.witness("semisimple", Witness(zeta0, eta, f"pattern {pattern}"))
            if re > IMAG_TOL * max(1.0, max(abs(c.center) for c in clusters)):
                diag.pure_imaginary = False
                diag.off_axis_pure_imaginary &= not off_axis
                diag.witness("pureImaginary", Witness(zeta0, eta, f"max |Re λ| = {re:.3e}"))
    if not square:
        diag.weakly_hyperbolic = diag.evolutionary and diag.pure_imaginary
    diag.multiplicity_patterns = sorted(patterns)
    diag.constant_multiplicity = len(patterns) <= 1
    diag.off_axis_constant_multiplicity = len(off_axis_patterns) <= 1
    if changed_at is not None:
        zeta0, eta, pattern = changed_at
        diag.witness(
            "constantMultiplicity", Witness(zeta0, eta, f"pattern {pattern} after {first_pattern}")
        )
    logger.info(
        "boundary Cauchy scan %s: %d frozen points, semisimple=%s, constant multiplicity=%s",
        model.name, diag.points, diag.semisimple, diag.constant_multiplicity,
    )
    return diag


# --- resolvent bounds -----------------------------------------------------


@dataclass
class ResolventScan:
    constant: float
    refined_constant: float
    stable: bool
    gamma_exponent: float
    witness: Frequency | None


def _diagonal_samples(d: int, resolution: int, eta_floor: float) -> list[Frequency]:
    gammas = np.logspace(-3, np.log10(0.95), 4 * resolution)
    angles = 2 * np.pi * (np.arange(8 * resolution) + 0.5) / (8 * resolution)
    out = []
    for g in gammas:
        for phi in angles:
            z = hemisphere_point(float(g), float(phi), d)
            if z.eta_norm >= eta_floor or d == 1:
                out.append(z)
    return out


def _diagonal_norms(model, reduced, samples, block: bool = False):
    values = []
    for z in samples:
        try:
            gens = enlarged_frozen_generators(model, z, reduced)
        except NumericError:
            continue
        m = z.s * np.eye(model.N) + _generator(gens, z.eta)
        if block:
            k = reduced.gamma_tilde2.shape[0]
            ts = enlarged_system(model, z, reduced)
            alpha = sum(e * (a @ np.linalg.inv(ts.A0coef)) for e, a in zip(z.eta, ts.Ajcoefs))
            m = z.s * np.eye(k) + 1j * alpha[-k:, -k:]
        norm = float(np.linalg.norm(np.linalg.inv(m), 2))
        values.append((z, norm))
    return values


def resolvent_norm_scan(
    model: HyperbolicParabolicModel,
    reduced: ReducedBC | None = None,
    resolution: int = 4,
    eta_floor: float = 0.0,
    block: bool = False,
) -> ResolventScan:
    """max γ·‖(γ + iτ + Σ iη_j 𝒜̃_j(ζ))⁻¹‖ over ζ on the hemisphere, at two resolutions.

    The fitted γ-exponent is the slope of log max‖·⁻¹‖ against log γ.
    """
    reduced = _require_case_ii(model, reduced)
    coarse = _diagonal_norms(model, reduced, _diagonal_samples(model.d, resolution, eta_floor), block)
    fine = _diagonal_norms(model, reduced, _diagonal_samples(model.d, 2 * resolution, eta_floor), block)
    if not coarse or not fine:
        raise NotEvolutionary("no evolutionary samples for the resolvent scan")
    c1 = max(z.gamma * n for z, n in coarse)
    c2, witness = max(((z.gamma * n, z) for z, n in fine), key=lambda t: t[0])

    by_gamma: dict[float, float] = {}
    for z, n in fine:
        by_gamma[z.gamma] = max(by_gamma.get(z.gamma, 0.0), n)
    gs = np.array(sorted(by_gamma))
    ns = np.array([by_gamma[g] for g in gs])
    exponent = float(np.polyfit(np.log(gs), np.log(ns), 1)[0]) if len(gs) > 1 else 0.0

    stable = bool(np.isfinite(c2) and c2 <= 1.5 * c1)
    logger.info("resolvent scan %s: C=%.4g refined C=%.4g exponent %.3f", model.name, c1, c2, exponent)
    return ResolventScan(c1, c2, stable, exponent, witness)


# --- sharp scalar condition and the lopver quantity -----------------------


@dataclass
class SharpScalar:
    values: dict[tuple[float, ...], complex]
    minimum: float
    passed: bool


def sharp_scalar_condition(
    model: HyperbolicParabolicModel,
    reduced: ReducedBC | None = None,
    etas: list[tuple[float, ...]] | None = None,
    tol: float = 1e-8,
) -> SharpScalar:
    """Σ iη_j ᾱ_j with ᾱ_j = (𝒜_j𝒜₀⁻¹)_NN frozen at (γ, τ, η) = (0, 0, η)."""
    reduced = _require_case_ii(model, reduced)
    if reduced.gamma_tilde2.shape[0] != 1:
        raise WrongShape(
            f"{reduced.gamma_tilde2.shape[0]} reduced Neumann conditions; use the block resolvent scan"
        )
    if model.d == 1:
        return SharpScalar({}, np.inf, True)
    etas = eta_directions(model.d) if etas is None else etas
    values = {}
    for eta in etas:
        zeta0 = Frequency(0.0, 0.0, eta)
        ts = enlarged_system(model, zeta0, reduced)
        ok, cond = evolutionary_check(ts)
        if not ok:
            raise NotEvolutionaryAtPoint(f"𝒜₀ is singular at {zeta0} (condition {cond:.3e})")
        a0_inv = np.linalg.inv(ts.A0coef)
        alpha = [(a @ a0_inv)[-1, -1] for a in ts.Ajcoefs]
        values[tuple(eta)] = complex(sum(1j * e * a for e, a in zip(eta, alpha)))
    minimum = min(abs(v) for v in values.values())
    return SharpScalar(values, float(minimum), bool(minimum > tol))


def ulx_block_inverse(s: complex, eta, mats: list[np.ndarray], k: int = 1) -> np.ndarray:
    """Inverse of s + Σ iη_j X_j when only the last k rows of each X_j are nonzero."""
    x = 1j * sum(e * m for e, m in zip(eta, mats))
    n = x.shape[0]
    lower = x[n - k :, : n - k]
    corner = s * np.eye(k) + x[n - k :, n - k :]
    corner_inv = np.linalg.inv(corner)
    out = np.zeros((n, n), dtype=complex)
    out[: n - k, : n - k] = np.eye(n - k) / s
    out[n - k :, : n - k] = -corner_inv @ lower / s
    out[n - k :, n - k :] = corner_inv
    return out


def lopver_quantity(
    model: HyperbolicParabolicModel, zeta: Frequency, reduced: ReducedBC | None = None
) -> complex:
    """(γ + iτ)^(rank Γ̃₂ − N) det(γ + iτ + Σ iη_j 𝒜̃_j(ζ))."""
    reduced = _require_case_ii(model, reduced)
    gt2 = reduced.gamma_tilde2
    rank_matrix = np.vstack([model.gamma1, gt2 @ _ad_inverse(model) @ interior_symbol(model, zeta)])
    s_vals = np.linalg.svd(rank_matrix, compute_uv=False)
    if s_vals.size == 0 or s_vals[-1] <= 1e-12 * max(1.0, s_vals[0]) or rank_matrix.shape[0] > model.N:
        raise RankConditionFails(f"(Γ1; Γ̃2 A_d⁻¹(γ+iτ+iΣηA)) drops rank at {zeta}")
    gens = enlarged_frozen_generators(model, zeta, reduced)
    m = zeta.s * np.eye(model.N) + _generator(gens, zeta.eta)
    power = gt2.shape[0] - model.N
    return complex(zeta.s**power * np.linalg.det(m))


def cauchy_diagnostics(
    model: HyperbolicParabolicModel,
    reduced: ReducedBC | None = None,
    points: int = 32,
    eta_floor: float = 0.0,
    jobs: int = 1,
) -> CauchyDiagnostics:
    """Full method-two report: flags, resolvent constant, and the sharp scalar or the Neumann block scan."""
    reduced = _require_case_ii(model, reduced)
    diag = semisimple_constmult_scan(model, reduced, points=points, jobs=jobs)
    if model.d >= 2 and diag.evolutionary:
        try:
            diag.resolvent_constant = resolvent_norm_scan(model, reduced, eta_floor=eta_floor).refined_constant
        except NumericError as exc:
            logger.warning("resolvent scan failed for %s: %s", model.name, exc)
    try:
        diag.sharp_scalar = sharp_scalar_condition(model, reduced).values
    except WrongShape:
        logger.info("model %s has several reduced Neumann rows; scanning the Neumann block", model.name)
        if diag.evolutionary:
            try:
                diag.block_resolvent = resolvent_norm_scan(model, reduced, eta_floor=eta_floor, block=True)
            except NumericError as exc:
                logger.warning("block resolvent scan failed for %s: %s", model.name, exc)
    except NumericError as exc:
        logger.warning("sharp scalar failed for %s: %s", model.name, exc)
    return diag
