"""Reduced hyperbolic boundary conditions and Lopatinski scans over the frequency hemisphere."""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from app.analysis.frequency import Frequency, angle_of, hemisphere_grid, hemisphere_point
from app.analysis.linalg import (
    SubspaceBasis,
    left_nullspace,
    nullspace,
    numerical_rank,
    pseudo_inverse,
    range_basis,
    spectral_split,
    subspace_det,
)
from app.analysis.symbols import _ad_inverse, interior_symbol
from app.core.config import settings
from app.core.errors import (
    CharacteristicBoundary,
    GlancingLimitFailure,
    GlancingOrCharacteristic,
    NumericError,
    RankDeficient,
    TransversalityFailure,
    ZeroFrequency,
)
from app.core.parallel import fan_out
from app.models.hp_model import HyperbolicParabolicModel

logger = logging.getLogger("app.analysis.lopatinski")

IDEMPOTENCE_TOL = 1e-3
GLANCING_STEP = 1e-4
GLANCING_THRESHOLD = 1e-6


class Case(str, enum.Enum):
    CASE_I = "CaseI"
    CASE_II = "CaseII"
    BOUNDARY = "BoundaryCase"


class Verdict(str, enum.Enum):
    UNIFORM = "UNIFORM"
    WEAK_ONLY = "WEAK_ONLY"
    FAILS_WEAK = "FAILS_WEAK"


@dataclass(frozen=True)
class CaseClassification:
    D: int
    Nn: int
    I: int  # noqa: E741
    O: int  # noqa: E741
    case: Case


@dataclass(frozen=True)
class ReducedBC:
    classification: CaseClassification
    gamma_tilde1: np.ndarray | None = None
    gamma_tilde2: np.ndarray | None = None
    M: np.ndarray | None = None
    K: np.ndarray | None = None
    X: np.ndarray | None = None


def _real(m: np.ndarray) -> np.ndarray:
    return np.real_if_close(np.asarray(m), tol=1000)


def _ad_split(model: HyperbolicParabolicModel):
    try:
        return spectral_split(model.Ad)
    except GlancingOrCharacteristic as exc:
        raise CharacteristicBoundary(f"A_d has an eigenvalue on the imaginary axis: {exc}") from exc


def classify_case(model: HyperbolicParabolicModel) -> CaseClassification:
    split = _ad_split(model)
    d, nn = model.n_dirichlet, model.n_neumann
    n_in, n_out = split.n_unstable, split.n_stable
    if d > n_in:
        case = Case.CASE_I
    elif d < n_in:
        case = Case.CASE_II
    else:
        case = Case.BOUNDARY
    return CaseClassification(d, nn, n_in, n_out, case)


def _full_row_rank(gamma: np.ndarray) -> np.ndarray:
    if gamma.shape[0] == numerical_rank(gamma):
        return gamma
    return _real(range_basis(gamma.T).T)


def reduce_case_ii(model: HyperbolicParabolicModel) -> ReducedBC:
    cls = classify_case(model)
    if cls.case is Case.CASE_I:
        raise TransversalityFailure("more Dirichlet rows than incoming modes: use the case (i) reduction")
    split = _ad_split(model)
    gamma2 = _full_row_rank(model.gamma2)
    image = gamma2 @ split.stable_basis
    if numerical_rank(image) < cls.O:
        raise TransversalityFailure("Γ2 is not of full rank on the stable space of A_d")
    m = _real(left_nullspace(image)) if cls.O else np.eye(gamma2.shape[0])
    return ReducedBC(cls, gamma_tilde2=_real(m @ gamma2), M=m)


def reduce_case_i(model: HyperbolicParabolicModel) -> ReducedBC:
    cls = classify_case(model)
    if cls.case is not Case.CASE_I:
        raise TransversalityFailure("fewer Dirichlet rows than incoming modes: use the case (ii) reduction")
    split = _ad_split(model)
    stable = split.stable_basis
    gamma1 = _full_row_rank(model.gamma1)
    if model.gamma2.size:
        gamma2 = _full_row_rank(model.gamma2)
        restricted = gamma2 @ stable
        if numerical_rank(restricted) < gamma2.shape[0]:
            raise TransversalityFailure("Γ2 is not of full rank on the stable space of A_d")
        kernel = stable @ nullspace(restricted, ncols=stable.shape[1]).basis
    else:
        kernel = stable
    x = _real(range_basis(_ad_inverse(model) @ kernel))
    image = gamma1 @ x
    if numerical_rank(image) < x.shape[1]:
        raise TransversalityFailure("Γ1 is not of full rank on X")
    k = _real(left_nullspace(image)) if x.shape[1] else np.eye(gamma1.shape[0])
    gt1 = _real(k @ gamma1)
    if numerical_rank(gt1) != cls.I:
        raise TransversalityFailure(f"reduced Dirichlet matrix has rank {numerical_rank(gt1)}, expected {cls.I}")
    return ReducedBC(cls, gamma_tilde1=gt1, K=k, X=x)


def reduce(model: HyperbolicParabolicModel) -> ReducedBC:
    if classify_case(model).case is Case.CASE_I:
        return reduce_case_i(model)
    return reduce_case_ii(model)


def rescaled_boundary_symbol(
    model: HyperbolicParabolicModel, reduced: ReducedBC, zeta: Frequency
) -> np.ndarray:
    """Γ̂₂(ζ) = −(iτ + γ + |η|)⁻¹ Γ̃₂ A_d⁻¹ (γ + iτ + Σ iη_j A_j), homogeneous of degree zero."""
    if zeta.is_zero:
        raise ZeroFrequency("the rescaled boundary symbol is undefined at ζ = 0")
    m = 1.0 / (1j * zeta.tau + zeta.gamma + zeta.eta_norm)
    return -m * reduced.gamma_tilde2 @ _ad_inverse(model) @ interior_symbol(model, zeta)


def boundary_stack(model: HyperbolicParabolicModel, reduced: ReducedBC, zeta: Frequency) -> np.ndarray:
    if reduced.classification.case is Case.CASE_I:
        return reduced.gamma_tilde1.astype(complex)
    rows = [rescaled_boundary_symbol(model, reduced, zeta)]
    if model.gamma1.size:
        rows.insert(0, _full_row_rank(model.gamma1).astype(complex))
    return np.vstack(rows)


def lopatinski_symbol(model: HyperbolicParabolicModel, zeta: Frequency) -> np.ndarray:
    """A_d⁻¹(γ + iτ + Σ iη_j A_j); its unstable space carries the decaying modes."""
    return _ad_inverse(model) @ interior_symbol(model, zeta)


def _richardson(gammas, values):
    # polynomial through the samples, evaluated at γ = 0
    gammas = np.asarray(gammas, dtype=float)
    out = np.zeros_like(values[0])
    for i, gi in enumerate(gammas):
        w = 1.0
        for j, gj in enumerate(gammas):
            if j != i:
                w *= (0.0 - gj) / (gi - gj)
        out = out + w * values[i]
    return out


def unstable_space(
    model: HyperbolicParabolicModel, zeta: Frequency, gammas: list[float] | None = None
) -> tuple[SubspaceBasis, bool]:
    """𝔼₊ of the Lopatinski symbol and whether the γ ↓ 0 limit had to be taken."""
    try:
        return spectral_split(lopatinski_symbol(model, zeta)).unstable, False
    except GlancingOrCharacteristic:
        if zeta.gamma > 0:
            raise
    gammas = settings.EXTRAPOLATION_GAMMAS if gammas is None else gammas
    projectors = [
        spectral_split(lopatinski_symbol(model, zeta.with_gamma(g))).pi_plus for g in gammas
    ]
    p0 = _richardson(gammas, projectors)
    err = float(np.linalg.norm(p0 @ p0 - p0))
    if err > IDEMPOTENCE_TOL:
        raise GlancingLimitFailure(f"extrapolated projector is not idempotent ({err:.3e}) at {zeta}")
    rank = int(round(np.trace(p0).real))
    u, _, _ = np.linalg.svd(p0)
    return SubspaceBasis(model.N, u[:, :rank]), True


@dataclass
class LopatinskiScanRecord:
    zeta: Frequency
    det_uniform: complex = 0j
    min_singular: float = 0.0
    well_cond: float = np.inf
    glancing: bool = False
    kernel_dim: int = 0
    level: int = 0
    index: int = 0
    error: str | None = None

    @property
    def abs_det(self) -> float:
        return abs(self.det_uniform)


def uniform_lop_det(
    model: HyperbolicParabolicModel,
    reduced: ReducedBC,
    zeta: Frequency,
    gammas: list[float] | None = None,
) -> LopatinskiScanRecord:
    e_plus, glancing = unstable_space(model, zeta, gammas)
    stack = boundary_stack(model, reduced, zeta)
    kernel = nullspace(stack, ncols=model.N)
    if kernel.dim + e_plus.dim == model.N:
        det = subspace_det(kernel, e_plus)
    else:
        det = 0j
    norm = float(np.linalg.norm(stack, 2))
    s = np.linalg.svd(stack @ e_plus.basis, compute_uv=False) if e_plus.dim else np.array([norm])
    min_singular = float(s[-1] / norm) if s.size and stack.shape[0] == e_plus.dim else 0.0
    try:
        well_cond = pseudo_inverse(stack).well_cond
    except RankDeficient:
        well_cond = np.inf
    return LopatinskiScanRecord(
        zeta=zeta,
        det_uniform=complex(det),
        min_singular=min_singular,
        well_cond=float(well_cond),
        glancing=glancing,
        kernel_dim=kernel.dim,
    )


@dataclass
class LopatinskiScan:
    verdict: Verdict
    records: list[LopatinskiScanRecord]
    min_abs_det: float
    argmin: Frequency | None
    max_well_cond: float
    min_positive_abs_det: float
    refined_min: float | None = None
    refined_witness: Frequency | None = None
    lopsat_consistent: bool = True
    glancing_points: list[Frequency] = field(default_factory=list)
    failed: int = 0


def _point(params: np.ndarray, d: int, gamma_min: float, tau_sign: float) -> Frequency:
    g = float(np.clip(params[0], gamma_min, 1.0))
    if d == 1:
        return Frequency(tau_sign * float(np.sqrt(max(0.0, 1 - g * g))), g)
    return hemisphere_point(g, float(params[1]), d, float(params[2]) if d > 2 else 0.0)


def _refine_zero(model, reduced, start: Frequency, gamma_min: float, gammas) -> tuple[float, Frequency]:
    """Nelder-Mead on the transversality measure from a grid minimiser."""
    d = model.d
    x0 = [start.gamma]
    if d >= 2:
        x0.append(angle_of(start))
    if d >= 3:
        x0.append(float(np.arctan2(start.eta[1], start.eta[0])))
    sign = 1.0 if start.tau >= 0 else -1.0

    def objective(p):
        try:
            return uniform_lop_det(model, reduced, _point(p, d, gamma_min, sign), gammas).min_singular
        except NumericError:
            return 1.0

    res = minimize(
        objective, np.array(x0), method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000},
    )
    return float(res.fun), _point(res.x, d, gamma_min, sign)


def scan_uniform(
    model: HyperbolicParabolicModel,
    reduced: ReducedBC | None = None,
    points: int | None = None,
    gamma_levels: list[float] | None = None,
    threshold: float | None = None,
    zero_tol: float | None = None,
    jobs: int = 1,
    refine_starts: int = 3,
) -> LopatinskiScan:
    reduced = reduce(model) if reduced is None else reduced
    threshold = settings.UNIFORM_THRESHOLD if threshold is None else threshold
    zero_tol = settings.ZERO_TOL if zero_tol is None else zero_tol
    levels = settings.GAMMA_LEVELS if gamma_levels is None else gamma_levels
    grid = hemisphere_grid(model.d, points, levels)

    def evaluate(item):
        level, index, zeta = item
        try:
            rec = uniform_lop_det(model, reduced, zeta)
        except NumericError as exc:
            logger.warning("lopatinski point %s failed: %s", zeta, exc)
            rec = LopatinskiScanRecord(zeta=zeta, error=f"{type(exc).__name__}: {exc}")
        rec.level, rec.index = level, index
        return rec

    records = fan_out(evaluate, grid, jobs)
    ok = [r for r in records if r.error is None]
    if not ok:
        raise GlancingLimitFailure("every frequency of the scan failed")
    best = min(ok, key=lambda r: r.abs_det)
    positive = [r for r in ok if r.zeta.gamma > 0]
    min_pos = min((r.abs_det for r in positive), default=np.inf)
    gamma_min = min((g for g in levels if g > 0), default=1.0)

    refined_min, witness = None, None
    if positive:
        starts = sorted(positive, key=lambda r: r.min_singular)[:refine_starts]
        for rec in starts:
            value, where = _refine_zero(model, reduced, rec.zeta, gamma_min, None)
            if refined_min is None or value < refined_min:
                refined_min, witness = value, where

    if min_pos < zero_tol:
        raw = Verdict.FAILS_WEAK
        witness = min(positive, key=lambda r: r.abs_det).zeta
        refined_min = min(refined_min or min_pos, min_pos)
    elif refined_min is not None and refined_min < zero_tol:
        raw = Verdict.FAILS_WEAK
    elif best.abs_det < threshold:
        raw = Verdict.WEAK_ONLY
    else:
        raw = Verdict.UNIFORM

    verdict = raw
    consistent = True
    if model.totally_incoming and raw is not Verdict.FAILS_WEAK:
        # weak condition ⇒ uniform condition for totally incoming problems
        consistent = raw is Verdict.UNIFORM
        verdict = Verdict.UNIFORM
        if not consistent:
            logger.warning("model %s: scan minimum %.3e at %s overridden to UNIFORM", model.name, best.abs_det, best.zeta)

    logger.info(
        "lopatinski scan %s: %d points, verdict %s, min |det| %.3e at %s",
        model.name, len(records), verdict.value, best.abs_det, best.zeta,
    )
    return LopatinskiScan(
        verdict=verdict,
        records=records,
        min_abs_det=best.abs_det,
        argmin=best.zeta,
        max_well_cond=max(r.well_cond for r in ok),
        min_positive_abs_det=float(min_pos),
        refined_min=refined_min,
        refined_witness=witness,
        lopsat_consistent=consistent,
        glancing_points=[r.zeta for r in ok if r.glancing],
        failed=len(records) - len(ok),
    )


@dataclass(frozen=True)
class GlancingPoint:
    tau: float
    eta: tuple[float, ...]
    xi: float
    eigenvalue: float
    derivative: float


def _sorted_eigs(model: HyperbolicParabolicModel, eta, xi: float) -> np.ndarray:
    m = sum(e * a for e, a in zip(eta, model.tangential)) + xi * model.Ad
    return np.sort(np.linalg.eigvals(m).real)


def glancing_detector(
    model: HyperbolicParabolicModel, eta, samples: int = 801
) -> list[GlancingPoint]:
    """Boundary frequencies where a characteristic speed is stationary in ξ."""
    if model.d < 2:
        return []
    eta = tuple(np.atleast_1d(np.asarray(eta, dtype=float)))
    a_norm = max(np.linalg.norm(a, 2) for a in model.tangential + [model.Ad])
    sigma = float(np.linalg.svd(model.Ad, compute_uv=False)[-1])
    bound = 4.0 * max(1.0, float(np.linalg.norm(eta))) * a_norm / sigma
    xs = np.linspace(-bound, bound, samples)

    def slope(k: int, xi: float) -> float:
        return float(
            (_sorted_eigs(model, eta, xi + GLANCING_STEP)[k] - _sorted_eigs(model, eta, xi - GLANCING_STEP)[k])
            / (2 * GLANCING_STEP)
        )

    out = []
    for k in range(model.N):
        values = np.array([slope(k, x) for x in xs])
        for i in range(len(xs) - 1):
            if values[i] == 0.0 or values[i] * values[i + 1] < 0:
                lo, hi = xs[i], xs[i + 1]
                xi = lo if values[i] == 0.0 else brentq(lambda x: slope(k, x), lo, hi, xtol=1e-12)
                deriv = slope(k, xi)
                if abs(deriv) < GLANCING_THRESHOLD:
                    lam = float(_sorted_eigs(model, eta, xi)[k])
                    out.append(GlancingPoint(-lam, eta, float(xi), lam, deriv))
    logger.debug("glancing detector at η=%s: %d points", eta, len(out))
    return out
