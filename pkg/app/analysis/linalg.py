"""Dense complex linear algebra shared by every symbol computation.

Matrices are plain ``numpy`` arrays of complex dtype. Invariant subspaces come
from an ordered complex Schur form; spectral projectors from one Sylvester solve
on top of it, which keeps them well defined near defective spectra.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from app.core.config import settings
from app.core.errors import (
    DimensionMismatch,
    GlancingOrCharacteristic,
    NonSquare,
    NotInStableSubspace,
    NumericalFailure,
    RankDeficient,
)


def as_matrix(value) -> np.ndarray:
    m = np.atleast_2d(np.asarray(value, dtype=complex))
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalFailure("matrix has non-finite entries")
    return m


def _square(m) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise NonSquare(f"matrix of shape {m.shape} is not square")
    return m


@dataclass(frozen=True)
class SubspaceBasis:
    ambient_dim: int
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_columns(cls, columns, tol: float | None = None) -> "SubspaceBasis":
        cols = np.asarray(columns, dtype=complex)
        if cols.ndim == 1:
            cols = cols[:, None]
        n = cols.shape[0]
        if cols.shape[1] == 0:
            return cls.empty(n)
        return cls(n, range_basis(cols, tol))

    @classmethod
    def empty(cls, n: int) -> "SubspaceBasis":
        return cls(n, np.zeros((n, 0), dtype=complex))

    @classmethod
    def full(cls, n: int) -> "SubspaceBasis":
        return cls(n, np.eye(n, dtype=complex))

    def contains(self, v, tol: float = 1e-8) -> bool:
        v = np.asarray(v, dtype=complex)
        residual = v - self.basis @ (self.basis.conj().T @ v)
        return bool(np.linalg.norm(residual) <= tol * max(1.0, np.linalg.norm(v)))


@dataclass(frozen=True)
class SpectralSplit:
    eigenvalues: np.ndarray
    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    pi_minus: np.ndarray
    pi_plus: np.ndarray
    gap_width: float

    @property
    def n_stable(self) -> int:
        return self.stable_basis.shape[1]

    @property
    def n_unstable(self) -> int:
        return self.unstable_basis.shape[1]

    @property
    def stable(self) -> SubspaceBasis:
        return SubspaceBasis(self.stable_basis.shape[0], self.stable_basis)

    @property
    def unstable(self) -> SubspaceBasis:
        return SubspaceBasis(self.unstable_basis.shape[0], self.unstable_basis)


def sort_eigenvalues(values: np.ndarray) -> np.ndarray:
    return np.lexsort((values.imag, values.real))


def eig(m, rel_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    m = _square(m)
    try:
        values, vectors = sla.eig(m)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc
    order = sort_eigenvalues(values)
    values, vectors = values[order], vectors[:, order]

    scale = max(np.linalg.norm(m), 1.0)
    residual = np.linalg.norm(m @ vectors - vectors * values, axis=0)
    if residual.size and residual.max() > rel_tol * scale:
        raise NumericalFailure(f"eigenpair residual {residual.max():.3e} too large")
    return values, vectors


def eigvals(m) -> np.ndarray:
    values = sla.eigvals(_square(m))
    return values[sort_eigenvalues(values)]


def range_basis(cols, tol: float | None = None) -> np.ndarray:
    tol = settings.RANK_TOL if tol is None else tol
    cols = np.asarray(cols, dtype=complex)
    if cols.size == 0:
        return np.zeros((cols.shape[0], 0), dtype=complex)
    return sla.orth(cols, rcond=tol)


def numerical_rank(m, tol: float | None = None) -> int:
    tol = settings.RANK_TOL if tol is None else tol
    m = np.asarray(m, dtype=complex)
    if m.size == 0:
        return 0
    s = sla.svdvals(m)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace(gamma, tol: float | None = None, ncols: int | None = None) -> SubspaceBasis:
    tol = settings.RANK_TOL if tol is None else tol
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.ndim == 1:
        gamma = gamma[None, :]
    n = gamma.shape[1] if ncols is None else ncols
    if gamma.shape[0] == 0 or not np.any(gamma):
        return SubspaceBasis.full(n)
    return SubspaceBasis(n, sla.null_space(gamma, rcond=tol))


def left_nullspace(m, tol: float | None = None) -> np.ndarray:
    """Orthonormal rows annihilating the columns of ``m``."""
    m = np.asarray(m, dtype=complex)
    return nullspace(m.conj().T, tol, ncols=m.shape[0]).basis.conj().T


def subspace_det(b1: SubspaceBasis, b2: SubspaceBasis) -> complex:
    if b1.ambient_dim != b2.ambient_dim:
        raise DimensionMismatch("subspaces live in different ambient spaces")
    if b1.dim + b2.dim != b1.ambient_dim:
        raise DimensionMismatch(
            f"dimensions {b1.dim} + {b2.dim} != ambient {b1.ambient_dim}"
        )
    return complex(np.linalg.det(np.hstack([b1.basis, b2.basis])))


@dataclass(frozen=True)
class PseudoInverse:
    matrix: np.ndarray
    norm: float
    inverse_norm: float

    @property
    def well_cond(self) -> float:
        return max(self.norm, self.inverse_norm)


def pseudo_inverse(gamma, tol: float | None = None) -> PseudoInverse:
    gamma = as_matrix(gamma)
    if numerical_rank(gamma, tol) < gamma.shape[0]:
        raise RankDeficient(f"matrix of shape {gamma.shape} lacks full row rank")
    gg = gamma @ gamma.conj().T
    dagger = gamma.conj().T @ np.linalg.solve(gg, np.eye(gg.shape[0]))
    return PseudoInverse(dagger, float(np.linalg.norm(gamma, 2)), float(np.linalg.norm(dagger, 2)))


def _separated_schur(m: np.ndarray, select) -> tuple[np.ndarray, np.ndarray, int]:
    t, q, k = sla.schur(m, output="complex", sort=select)
    return t, q, int(k)


def split_from_schur(t: np.ndarray, q: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leading-cluster basis, complementary-cluster basis and projector onto the leading cluster.

    ``t`` is upper triangular with the selected eigenvalues in the first ``k``
    diagonal slots.
    """
    n = t.shape[0]
    if k == 0:
        return np.zeros((n, 0), complex), q, np.zeros((n, n), complex)
    if k == n:
        return q, np.zeros((n, 0), complex), np.eye(n, dtype=complex)
    t11, t12, t22 = t[:k, :k], t[:k, k:], t[k:, k:]
    x = sla.solve_sylvester(t11, -t22, -t12)
    lead = q[:, :k]
    trail = range_basis(q @ np.vstack([x, np.eye(n - k)]))
    proj = np.zeros((n, n), complex)
    proj[:k, :k] = np.eye(k)
    proj[:k, k:] = -x
    return lead, trail, q @ proj @ q.conj().T


def spectral_split(m, tol: float | None = None) -> SpectralSplit:
    tol = settings.EIG_TOL if tol is None else tol
    m = _square(m)
    values = eigvals(m)
    scale = max(np.linalg.norm(m), np.finfo(float).tiny)
    gap = float(np.min(np.abs(values.real))) if values.size else np.inf
    if gap < tol * scale:
        raise GlancingOrCharacteristic(
            f"eigenvalue within {gap:.3e} of the imaginary axis"
        )
    t, q, k = _separated_schur(m, lambda z: z.real < 0)
    stable, unstable, pi_minus = split_from_schur(t, q, k)
    n = m.shape[0]
    return SpectralSplit(
        eigenvalues=values,
        stable_basis=stable,
        unstable_basis=unstable,
        pi_minus=pi_minus,
        pi_plus=np.eye(n) - pi_minus,
        gap_width=gap,
    )


def decaying_exponential_apply(a, split: SpectralSplit, z: float, v, tol: float = 1e-8) -> np.ndarray:
    """Evaluate ``exp(z A) v`` for ``v`` (a vector or a stack of columns) in the stable space."""
    a = _square(a)
    v = np.asarray(v, dtype=complex)
    column = v.ndim == 1
    cols = v[:, None] if column else v

    basis = split.stable_basis
    coeffs = basis.conj().T @ cols
    off = np.linalg.norm(cols - basis @ coeffs, axis=0)
    if np.any(off > tol * np.maximum(1.0, np.linalg.norm(cols, axis=0))):
        raise NotInStableSubspace(f"vector leaves the stable subspace by {off.max():.3e}")
    if basis.shape[1] == 0:
        out = np.zeros_like(cols)
    else:
        reduced = basis.conj().T @ a @ basis
        out = basis @ (sla.expm(z * reduced) @ coeffs)
    return out[:, 0] if column else out


def is_symmetric(m, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.linalg.norm(m - m.T) <= tol * max(1.0, np.linalg.norm(m)))


@dataclass(frozen=True)
class EigenCluster:
    center: complex
    algebraic: int
    geometric: int

    @property
    def semisimple(self) -> bool:
        return self.algebraic == self.geometric


def group_eigenvalues(values: np.ndarray, radius: float) -> list[np.ndarray]:
    """Single-linkage groups of eigenvalues closer than ``radius`` (absolute)."""
    n = len(values)
    labels = list(range(n))

    def root(i: int) -> int:
        while labels[i] != i:
            labels[i] = labels[labels[i]]
            i = labels[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= radius:
                labels[root(i)] = root(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(root(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def eigen_clusters(
    m, radius: float | None = None, independence_tol: float = 1e-6
) -> list[EigenCluster]:
    """Cluster the spectrum of ``m`` and count independent eigenvectors per cluster.

    A cluster is semisimple when its unit eigenvectors span a space of full
    dimension; near-parallel vectors are the numerical trace of a Jordan block.
    """
    radius = settings.CLUSTER_RADIUS if radius is None else radius
    m = _square(m)
    try:
        values, vectors = sla.eig(m)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc
    order = sort_eigenvalues(values)
    values, vectors = values[order], vectors[:, order]
    scale = max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)

    out = []
    for idx in group_eigenvalues(values, radius * scale):
        block = vectors[:, idx]
        block = block / np.linalg.norm(block, axis=0)
        s = sla.svdvals(block)
        out.append(
            EigenCluster(
                center=complex(values[idx].mean()),
                algebraic=len(idx),
                geometric=int(np.sum(s > independence_tol * s[0])),
            )
        )
    return out


def multiplicity_pattern(clusters: list[EigenCluster]) -> tuple[int, ...]:
    return tuple(sorted((c.algebraic for c in clusters), reverse=True))


def smallest_gap(values: np.ndarray) -> float:
    values = np.asarray(values)
    if values.size < 2:
        return np.inf
    diff = np.abs(values[:, None] - values[None, :])
    diff[np.diag_indices_from(diff)] = np.inf
    return float(diff.min())
