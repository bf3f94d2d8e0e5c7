"""Tests for grids, discrete fields, difference stencils and the Newton solver."""
import numpy as np
import pytest
import scipy.sparse as sp

from app.analysis.fields import DiscreteField, Grid
from app.analysis.newton import colored_jacobian, damped_newton
from app.analysis.stencils import apply_nodes, centered, node_blocks, second_difference, upwind
from app.core.errors import DimensionMismatch, NonlinearSolveDiverged


class TestGrid:
    def test_uniform(self):
        g = Grid.uniform(1.0, 0.5, 0.1)
        assert (g.nx, g.nt) == (11, 11)
        assert g.dx == pytest.approx(0.1)
        assert g.dt == pytest.approx(0.05)

    def test_layer_resolving(self):
        g = Grid.layer_resolving(0.1, 1.0, 0.1, per_epsilon=8)
        assert g.dx == pytest.approx(0.0125)
        assert g.resolves(0.1)
        assert not g.resolves(0.01)

    def test_refined(self):
        g = Grid.uniform(2.0, 1.0, 0.5).refined()
        assert g.dx == pytest.approx(0.25)


class TestDiscreteField:
    def test_shape_checked(self):
        g = Grid.uniform(1.0, 1.0, 0.5)
        with pytest.raises(DimensionMismatch):
            DiscreteField(g, np.zeros((2, 2, 1)))

    def test_non_finite_rejected(self):
        g = Grid.uniform(1.0, 1.0, 0.5)
        values = np.zeros((g.nt, g.nx))
        values[0, 0] = np.nan
        with pytest.raises(ValueError):
            DiscreteField(g, values)

    def test_derivatives_of_polynomial(self):
        g = Grid.uniform(1.0, 1.0, 0.05)
        u = DiscreteField.from_function(g, lambda t, x: (t * x**2)[..., None])
        assert np.allclose(u.dxx_field().values[..., 0], 2 * g.t[:, None], atol=1e-8)
        assert np.allclose(u.normal_trace()[:, 0], 0.0, atol=1e-10)
        assert np.allclose(u.dt_field().values[..., 0], g.x[None, :] ** 2, atol=1e-10)

    def test_norms(self):
        g = Grid.uniform(1.0, 1.0, 0.01)
        one = DiscreteField.from_function(g, lambda t, x: np.ones(t.shape + (1,)))
        assert one.sup_norm() == 1.0
        assert one.l2_norm() == pytest.approx(1.0)
        assert one.weighted_norm(1.0) == pytest.approx(np.sqrt((1 - np.exp(-2.0)) / 2), rel=1e-4)

    def test_arithmetic_checks_grid(self):
        a = DiscreteField.zeros(Grid.uniform(1.0, 1.0, 0.5), 1)
        b = DiscreteField.zeros(Grid.uniform(1.0, 1.0, 0.25), 1)
        with pytest.raises(DimensionMismatch):
            a + b
        assert (2.0 * a).values.shape == a.values.shape

    def test_as_dict_complex(self):
        f = DiscreteField.zeros(Grid.uniform(1.0, 1.0, 0.5, dt=0.5), 2, dtype=complex, mode=1.0)
        out = f.as_dict()
        assert out["dims"] == [3, 3, 2]
        assert "real" in out and "imag" in out
        assert out["mode"] == 1.0


class TestStencils:
    x = np.linspace(0.0, 1.0, 41)
    dx = x[1] - x[0]

    def test_upwind_exact_on_quadratics(self):
        d = upwind(self.x.size, self.dx)
        assert np.allclose((d @ self.x**2)[2:], 2 * self.x[2:])
        assert (d @ self.x**2)[0] == 0.0

    def test_downwind_variant(self):
        d = upwind(self.x.size, self.dx, positive=False)
        assert np.allclose((d @ self.x**2)[:-2], 2 * self.x[:-2])
        assert (d @ self.x**2)[-1] == 0.0

    def test_centered(self):
        assert np.allclose((centered(self.x.size, self.dx) @ self.x**2)[1:-1], 2 * self.x[1:-1])

    def test_second_difference_reflection(self):
        lap = second_difference(self.x.size, self.dx)
        assert np.allclose(lap @ self.x**2, 2.0)
        # even extension of a linear function has a kink at 0
        assert (lap @ self.x)[0] == pytest.approx(2 / self.dx)

    def test_node_blocks(self):
        nx, n = 5, 2
        stencil = centered(nx, 1.0)
        a = np.array([[1.0, 2.0], [0.0, 3.0]])
        u = np.arange(nx * n, dtype=float).reshape(nx, n)
        op = node_blocks(stencil, a)
        expected = (apply_nodes(stencil, u) @ a.T).ravel()
        assert np.allclose(op @ u.ravel(), expected)


class TestNewton:
    def _system(self, n=20):
        # tridiagonal nonlinear residual: x_j^3 + x_j - (x_{j-1} + x_{j+1})/4 - 1
        def residual(x):
            left = np.concatenate([[0.0], x[:-1]])
            right = np.concatenate([x[1:], [0.0]])
            return x**3 + x - 0.25 * (left + right) - 1.0

        nodes = np.arange(n)
        lo = np.maximum(nodes - 1, 0)
        hi = np.minimum(nodes + 1, n - 1)
        return residual, lo, hi

    def test_colored_jacobian_matches_dense(self):
        residual, lo, hi = self._system()
        x = np.linspace(0.1, 1.0, 20)
        jac = colored_jacobian(residual, x, 1, lo, hi).toarray()
        exact = np.diag(3 * x**2 + 1) - 0.25 * (np.eye(20, k=1) + np.eye(20, k=-1))
        assert np.allclose(jac, exact, atol=1e-5)

    def test_newton_converges(self):
        residual, lo, hi = self._system()
        x, iterations = damped_newton(
            residual, np.zeros(20), lambda x, r: colored_jacobian(residual, x, 1, lo, hi, f0=r), tol=1e-12
        )
        assert np.abs(residual(x)).max() < 1e-10
        assert 1 <= iterations < 20

    def test_singular_jacobian(self):
        with pytest.raises(NonlinearSolveDiverged):
            damped_newton(lambda x: x**2 + 1.0, np.zeros(1), lambda x, r: sp.csc_matrix((1, 1)))
