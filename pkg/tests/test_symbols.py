"""Tests for the viscous symbols, the H/P block split and the Evans function."""
import numpy as np
import pytest

from app.analysis.frequency import Frequency
from app.analysis.symbols import (
    block_diagonalize,
    degeneracy_R,
    evans,
    hyperbolic_boundary_symbol,
    lemma_am_conjugator,
    parabolic_symbol_G,
    small_frequency_radius,
)
from app.core.errors import ClustersNotSeparated, SingularH
from app.models.loader import load_builtin


def _small_roots(speeds, zeta: Frequency) -> np.ndarray:
    # λ² − aλ − s = 0, root near zero
    s = zeta.s
    return np.array([(a - np.sqrt(a * a + 4 * s)) / 2 for a in speeds])


class TestSymbols:
    def test_hyperbolic_symbol_one_dimensional(self):
        model = load_builtin("fornet")
        z = Frequency(0.3, 0.4)
        expected = -np.diag([1 / 2.0, 1 / 1.0]) * z.s
        assert np.allclose(hyperbolic_boundary_symbol(model, z), expected)

    def test_G_shape(self):
        model = load_builtin("inceg")
        g = parabolic_symbol_G(model, Frequency(0.01, 0.01, (0.02,)))
        assert g.shape == (4, 4)
        assert np.allclose(g[:2, 2:], np.eye(2))

    def test_radius(self):
        assert small_frequency_radius(load_builtin("fornet")) == pytest.approx(0.1)


class TestBlockDiagonalization:
    def test_scalar_roots(self):
        model = load_builtin("fornet")
        z = Frequency(0.01, 0.02)
        bd = block_diagonalize(model, z)
        assert np.allclose(np.sort_complex(np.linalg.eigvals(bd.H)), np.sort_complex(_small_roots([2.0, 1.0], z)))
        assert bd.residual < 1e-10

    def test_P_near_Ad(self):
        model = load_builtin("inceg")
        bd = block_diagonalize(model, Frequency(0.005, 0.005, (0.005,)))
        assert np.linalg.norm(bd.P - model.Ad) < 0.1

    def test_large_frequency_rejected(self):
        with pytest.raises(ClustersNotSeparated):
            block_diagonalize(load_builtin("fornet"), Frequency(10.0, 0.0))

    def test_conjugator_agrees(self):
        model = load_builtin("fornet")
        z = Frequency(0.01, 0.02)
        am = lemma_am_conjugator(model, z)
        assert am.residual < 1e-10
        assert np.allclose(np.sort_complex(np.linalg.eigvals(am.H)),
                           np.sort_complex(np.linalg.eigvals(block_diagonalize(model, z).H)), atol=1e-10)

    def test_conjugator_with_perturbation(self):
        am = lemma_am_conjugator(load_builtin("inceg"), Frequency(0.01, 0.01, (0.01,)), p3norm=1e-3)
        assert am.residual < 1e-8
        assert am.iterations >= 1


class TestDegeneracy:
    def test_zero_frequency(self):
        model = load_builtin("fornet")
        assert degeneracy_R(model, Frequency(0.0, 0.0)) == 0.0
        with pytest.raises(SingularH):
            degeneracy_R(model, Frequency(0.0, 0.0), strict=True)

    def test_R_is_smallest_root(self):
        model = load_builtin("fornet")
        z = Frequency(0.02, 0.01)
        expected = np.abs(_small_roots([2.0, 1.0], z)).min()
        assert degeneracy_R(model, z) == pytest.approx(expected, rel=1e-8)

    def test_ratio_bounded_below(self):
        model = load_builtin("inceg")
        for z in (Frequency(0.0, 0.01, (0.01,)), Frequency(0.02, 0.001, (0.0,)), Frequency(0.0, 0.02, (0.0,))):
            assert degeneracy_R(model, z) / (z.gamma + z.rho**2) > 0.1


class TestEvans:
    def test_det_h_is_product_of_roots(self):
        model = load_builtin("fornet")
        z = Frequency(0.01, 0.02)
        value = evans(model, z)
        assert value.det_h == pytest.approx(np.prod(_small_roots([2.0, 1.0], z)))

    def test_definitional_value_for_incoming(self):
        value = evans(load_builtin("fornet"), Frequency(0.01, 0.02))
        assert value.definitional is not None
        assert value.ratio is not None and np.isfinite(abs(value.ratio))
