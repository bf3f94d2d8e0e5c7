"""Laplace-Fourier symbols of the viscous problem and the low-frequency Evans function."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from app.analysis.frequency import Frequency
from app.analysis.linalg import (
    SubspaceBasis,
    _separated_schur,
    range_basis,
    spectral_split,
    subspace_det,
)
from app.core.errors import (
    ClustersNotSeparated,
    ContractionDiverged,
    GlancingOrCharacteristic,
    NumericalFailure,
    SingularAd,
    SingularH,
)
from app.models.hp_model import HyperbolicParabolicModel

logger = logging.getLogger("app.analysis.symbols")


def tangential_symbol(model: HyperbolicParabolicModel, eta) -> np.ndarray:
    """Σ η_j A_j over the tangential directions j < d."""
    out = np.zeros((model.N, model.N), dtype=complex)
    for e, a in zip(eta, model.tangential):
        out += e * a
    return out


def interior_symbol(model: HyperbolicParabolicModel, zeta: Frequency) -> np.ndarray:
    """γ + iτ + Σ iη_j A_j."""
    return zeta.s * np.eye(model.N) + 1j * tangential_symbol(model, zeta.eta)


def _ad_inverse(model: HyperbolicParabolicModel) -> np.ndarray:
    ad = model.Ad
    s = np.linalg.svd(ad, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise SingularAd("A_d is singular at the base state")
    return np.linalg.inv(ad)


def hyperbolic_boundary_symbol(model: HyperbolicParabolicModel, zeta: Frequency) -> np.ndarray:
    """−A_d⁻¹(γ + iτ + Σ iη_j A_j); decaying solutions live in its stable space."""
    inner = interior_symbol(model, zeta)
    if zeta.gamma > 0 and model.symmetric:
        s = np.linalg.svd(inner, compute_uv=False)
        if s[-1] < 0.5 * zeta.gamma:
            raise NumericalFailure("γ + iτ + iΣηA lost invertibility for γ > 0")
    return -_ad_inverse(model) @ inner


def parabolic_symbol_G(model: HyperbolicParabolicModel, zeta: Frequency) -> np.ndarray:
    n = model.N
    m = interior_symbol(model, zeta) + zeta.eta_norm**2 * np.eye(n)
    _ad_inverse(model)
    return np.block([[np.zeros((n, n)), np.eye(n)], [m, model.Ad]])


def small_frequency_radius(model: HyperbolicParabolicModel) -> float:
    return 0.1 * float(np.linalg.svd(model.Ad, compute_uv=False)[-1])


@dataclass(frozen=True)
class BlockDiagonalization:
    H: np.ndarray
    P: np.ndarray
    S: np.ndarray
    residual: float
    hyperbolic_basis: np.ndarray


def _h_cluster(model: HyperbolicParabolicModel, g: np.ndarray):
    n = model.N
    cut = 0.5 * float(np.min(np.abs(np.linalg.eigvals(model.Ad))))
    t, q, k = _separated_schur(g, lambda z: abs(z) < cut)
    if k != n:
        raise ClustersNotSeparated(
            f"{k} eigenvalues of G below {cut:.3e}, expected {n}; frequency too large"
        )
    return t, q


def block_diagonalize(model: HyperbolicParabolicModel, zeta: Frequency) -> BlockDiagonalization:
    """Split G(ζ) into the N eigenvalues near 0 (block H) and the N near σ(A_d) (block P).

    S = [[I, P⁻¹], [H, I]]: the first block column is the graph of H over the
    first component, the second the graph of P⁻¹ over the second.
    """
    n = model.N
    g = parabolic_symbol_G(model, zeta)
    t, q = _h_cluster(model, g)
    v1, v2 = q[:n, :n], q[n:, :n]
    try:
        h = np.linalg.solve(v1.T, v2.T).T
    except np.linalg.LinAlgError as exc:
        raise ClustersNotSeparated("H-subspace is not a graph over the first component") from exc

    # complementary invariant subspace of the Schur form
    t11, t12, t22 = t[:n, :n], t[:n, n:], t[n:, n:]
    x = sla.solve_sylvester(t11, -t22, -t12)
    w = q @ np.vstack([x, np.eye(n)])
    w1, w2 = w[:n], w[n:]
    try:
        x12 = np.linalg.solve(w2.T, w1.T).T
    except np.linalg.LinAlgError as exc:
        raise ClustersNotSeparated("P-subspace is not a graph over the second component") from exc
    m = g[n:, :n]
    p = m @ x12 + model.Ad

    s = np.block([[np.eye(n), x12], [h, np.eye(n)]])
    conj = np.linalg.solve(s, g @ s)
    target = sla.block_diag(h, p)
    residual = float(np.linalg.norm(conj - target))
    scale = max(1.0, float(np.linalg.norm(g)))
    if residual > 1e-8 * scale:
        logger.warning("block diagonalisation residual %.3e at %s", residual, zeta)
    return BlockDiagonalization(h, p, s, residual, q[:, :n])


def random_p3(n: int, norm: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return norm * m / np.linalg.norm(m, 2)


@dataclass(frozen=True)
class AmConjugator:
    T: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    H: np.ndarray
    P: np.ndarray
    residual: float
    iterations: int


def lemma_am_conjugator(
    model: HyperbolicParabolicModel,
    beta: Frequency,
    p3norm: float = 0.0,
    p3: np.ndarray | None = None,
    max_iter: int = 500,
    tol: float = 1e-15,
) -> AmConjugator:
    """Conjugate [[0, I], [M, A]] to diag(H, P) with T = [[I, A⁻¹], [−A⁻¹M + τ₁, I + τ₂]].

    τ₁ and τ₂ are the fixed points of
    τ₁ = A⁻¹(τ₁ − A⁻¹M)² and τ₂ = (MA⁻¹ − τ₂Aτ₂)A⁻¹, which contract while
    ‖M‖ is small relative to A.
    """
    n = model.N
    a = model.Ad
    a_inv = _ad_inverse(model)
    if p3 is None:
        p3 = random_p3(n, p3norm) if p3norm else np.zeros((n, n))
    m = interior_symbol(model, beta) + beta.eta_norm**2 * np.eye(n) + p3

    tau1 = np.zeros((n, n), dtype=complex)
    tau2 = np.zeros((n, n), dtype=complex)
    am = a_inv @ m
    ma = m @ a_inv
    scale = max(1.0, float(np.linalg.norm(m)))
    for it in range(1, max_iter + 1):
        x = tau1 - am
        new1 = a_inv @ x @ x
        new2 = (ma - tau2 @ a @ tau2) @ a_inv
        delta = float(np.linalg.norm(new1 - tau1) + np.linalg.norm(new2 - tau2))
        tau1, tau2 = new1, new2
        if not np.all(np.isfinite(tau1)) or np.linalg.norm(tau2) > 1e6 * scale:
            raise ContractionDiverged(f"fixed-point iteration blew up at |β| = {beta.rho:.3e}")
        if delta <= tol * scale:
            break
    else:
        raise ContractionDiverged(f"no contraction after {max_iter} iterations at |β| = {beta.rho:.3e}")

    h = -am + tau1
    p = a + a @ tau2
    t = np.block([[np.eye(n), a_inv], [h, np.eye(n) + tau2]])
    g = np.block([[np.zeros((n, n)), np.eye(n)], [m, a]])
    residual = float(np.linalg.norm(np.linalg.solve(t, g @ t) - sla.block_diag(h, p)))
    return AmConjugator(t, tau1, tau2, h, p, residual, it)


@dataclass(frozen=True)
class EvansValue:
    det_h: complex
    definitional: complex | None
    ratio: complex | None


def _stable_space_of_G(model: HyperbolicParabolicModel, zeta: Frequency, g: np.ndarray) -> SubspaceBasis:
    try:
        split = spectral_split(g)
        return split.stable
    except GlancingOrCharacteristic:
        if not model.totally_incoming:
            raise
    # γ = 0 limit for A_d > 0: the decaying space is the H-cluster
    bd = block_diagonalize(model, zeta)
    return SubspaceBasis(2 * model.N, range_basis(bd.hyperbolic_basis))


def evans(model: HyperbolicParabolicModel, zeta: Frequency) -> EvansValue:
    """det H(ζ) together with det(E⁻(ζ), ker Γ) for the Neumann condition u' = 0."""
    n = model.N
    bd = block_diagonalize(model, zeta)
    det_h = complex(np.linalg.det(bd.H))
    g = parabolic_symbol_G(model, zeta)
    kernel = SubspaceBasis(2 * n, np.vstack([np.eye(n), np.zeros((n, n))]).astype(complex))
    try:
        stable = _stable_space_of_G(model, zeta, g)
    except GlancingOrCharacteristic:
        logger.debug("definitional Evans value undefined at %s", zeta)
        return EvansValue(det_h, None, None)
    if stable.dim != n:
        logger.warning("stable space of G has dimension %d at %s", stable.dim, zeta)
        return EvansValue(det_h, None, None)
    definitional = subspace_det(stable, kernel)
    ratio = det_h / definitional if definitional != 0 else None
    return EvansValue(det_h, definitional, ratio)


def degeneracy_R(model: HyperbolicParabolicModel, zeta: Frequency, strict: bool = False) -> float:
    """R(ζ) = 1/‖H(ζ)⁻¹‖, i.e. the smallest singular value of H."""
    if zeta.is_zero:
        if strict:
            raise SingularH("H vanishes at ζ = 0")
        return 0.0
    h = block_diagonalize(model, zeta).H
    r = float(np.linalg.svd(h, compute_uv=False)[-1])
    if strict and r <= 1e-14 * max(1.0, float(np.linalg.norm(h))):
        raise SingularH(f"H is singular at {zeta}")
    return r
