"""Tests for app/analysis/linalg.py."""
import numpy as np
import pytest

from app.analysis.linalg import (
    SubspaceBasis,
    decaying_exponential_apply,
    eig,
    eigen_clusters,
    left_nullspace,
    multiplicity_pattern,
    nullspace,
    numerical_rank,
    pseudo_inverse,
    smallest_gap,
    spectral_split,
    subspace_det,
)
from app.core.errors import (
    DimensionMismatch,
    GlancingOrCharacteristic,
    NonSquare,
    NotInStableSubspace,
    NumericalFailure,
    RankDeficient,
)


class TestEig:
    def test_sorted_by_real_part(self):
        values, vectors = eig(np.diag([3.0, -1.0, 2.0]))
        assert np.allclose(values, [-1.0, 2.0, 3.0])
        assert vectors.shape == (3, 3)

    def test_non_square_rejected(self):
        with pytest.raises(NonSquare):
            eig(np.ones((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(NumericalFailure):
            eig([[np.nan, 0.0], [0.0, 1.0]])


class TestSpectralSplit:
    def test_projectors(self, rng):
        m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        split = spectral_split(m)
        pm, pp = split.pi_minus, split.pi_plus
        assert np.linalg.norm(pm @ pm - pm) < 1e-8 * max(1.0, np.linalg.norm(pm))
        assert np.allclose(pm + pp, np.eye(6))
        assert np.linalg.norm(pm @ m - m @ pm) < 1e-8 * np.linalg.norm(m) * max(1.0, np.linalg.norm(pm))
        assert split.n_stable + split.n_unstable == 6
        assert split.n_stable == int(np.sum(np.linalg.eigvals(m).real < 0))

    def test_stable_basis_is_invariant(self):
        m = np.array([[-1.0, 5.0], [0.0, 2.0]])
        split = spectral_split(m)
        assert split.n_stable == 1
        v = split.stable_basis[:, 0]
        assert split.stable.contains(m @ v)

    def test_imaginary_axis_eigenvalue(self):
        with pytest.raises(GlancingOrCharacteristic):
            spectral_split(np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def test_jordan_block(self):
        m = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 3.0]])
        split = spectral_split(m)
        assert split.n_stable == 2
        assert np.allclose(split.pi_minus, np.diag([1.0, 1.0, 0.0]), atol=1e-10)


class TestSubspaces:
    def test_nullspace_of_zero_is_full(self):
        assert nullspace(np.zeros((1, 3))).dim == 3

    def test_nullspace_dimension(self):
        basis = nullspace([[1.0, 1.0, 0.0]])
        assert basis.dim == 2
        assert basis.contains([1.0, -1.0, 0.0])
        assert not basis.contains([1.0, 1.0, 0.0])

    def test_left_nullspace(self):
        m = np.array([[1.0], [1.0]])
        left = left_nullspace(m)
        assert left.shape == (1, 2)
        assert np.allclose(left @ m, 0.0)

    def test_subspace_det_dimension_check(self):
        e1 = SubspaceBasis.from_columns([[1.0], [0.0]])
        with pytest.raises(DimensionMismatch):
            subspace_det(e1, SubspaceBasis.full(2))

    def test_subspace_det_unit_vectors(self):
        e1 = SubspaceBasis(2, np.array([[1.0], [0.0]], dtype=complex))
        e2 = SubspaceBasis(2, np.array([[0.0], [1.0]], dtype=complex))
        assert abs(subspace_det(e1, e2) - 1.0) < 1e-12

    def test_rank(self):
        assert numerical_rank(np.zeros((2, 2))) == 0
        assert numerical_rank([[1.0, 2.0], [2.0, 4.0]]) == 1


class TestPseudoInverse:
    def test_right_inverse(self):
        gamma = np.array([[1.0, 2.0, 0.0]])
        pinv = pseudo_inverse(gamma)
        assert np.allclose(gamma @ pinv.matrix, np.eye(1))
        assert pinv.well_cond >= 1.0 / np.sqrt(5.0) - 1e-12

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            pseudo_inverse([[1.0, 1.0], [2.0, 2.0]])


class TestDecayingExponential:
    def test_matches_scalar_decay(self):
        m = np.diag([-2.0, 1.0])
        split = spectral_split(m)
        out = decaying_exponential_apply(m, split, 0.5, [1.0, 0.0])
        assert np.allclose(out, [np.exp(-1.0), 0.0])

    def test_rejects_unstable_vector(self):
        m = np.diag([-2.0, 1.0])
        with pytest.raises(NotInStableSubspace):
            decaying_exponential_apply(m, spectral_split(m), 0.5, [0.0, 1.0])


class TestClusters:
    def test_jordan_block_not_semisimple(self):
        clusters = eigen_clusters(np.array([[1.0, 1.0], [0.0, 1.0]]))
        assert len(clusters) == 1
        assert clusters[0].algebraic == 2
        assert not clusters[0].semisimple

    def test_diagonal_semisimple(self):
        clusters = eigen_clusters(np.diag([2.0, 2.0, 5.0]))
        assert multiplicity_pattern(clusters) == (2, 1)
        assert all(c.semisimple for c in clusters)

    def test_smallest_gap(self):
        assert smallest_gap(np.array([0.0, 1.0, 3.0])) == pytest.approx(1.0)
        assert smallest_gap(np.array([1.0])) == np.inf
