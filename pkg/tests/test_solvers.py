"""Tests for the viscous finite-difference solver, the Fornet limit and the resolvent ODE."""
import numpy as np
import pytest
from scipy.integrate import quad

from app.analysis.fields import DiscreteField, Grid
from app.analysis.frequency import Frequency
from app.analysis.solvers import (
    ExponentialProfile,
    Scheme,
    canonical_data,
    fornet_solve,
    gaussian_bump,
    hyperbolic_solve_incoming,
    resolvent_estimate_constant,
    resolvent_ode_solve,
    viscous_solve_1d,
    weighted_ratios,
)
from app.analysis.studies import cubic_forcing
from app.core.errors import DimensionMismatch, SupportReachedOutflow
from app.models.loader import from_model_file, load_builtin, parse_model_file


def _advection(speeds, gamma2=None):
    n = len(speeds)
    eye = np.eye(n).tolist()
    return from_model_file(
        parse_model_file(
            {
                "name": "advection",
                "d": 1,
                "N": n,
                "matrices": [eye, np.diag(speeds).tolist()],
                "gamma2": eye if gamma2 is None else gamma2,
                "baseState": [0.0] * n,
            }
        )
    )


def _manufactured(grid: Grid, a: float, eps: float):
    # u = t² cos x has ∂_x u(t, 0) = 0
    exact = DiscreteField.from_function(grid, lambda t, x: (t**2 * np.cos(x))[..., None])
    f = DiscreteField.from_function(
        grid, lambda t, x: (2 * t * np.cos(x) - a * t**2 * np.sin(x) + eps * t**2 * np.cos(x))[..., None]
    )
    return exact, f


class TestViscousLinear:
    def test_zero_data_gives_zero(self):
        grid = Grid.layer_resolving(0.1, 2.0, 0.5)
        run = viscous_solve_1d(load_builtin("fornet"), 0.1, DiscreteField.zeros(grid, 2))
        assert run.solution.sup_norm() == 0.0

    def test_manufactured_crank_nicolson(self):
        grid = Grid.uniform(2.0, 0.5, 0.01)
        exact, f = _manufactured(grid, 1.0, 0.1)
        run = viscous_solve_1d(_advection([1.0]), 0.1, f)
        assert (run.solution - exact).sup_norm() < 1e-3

    def test_manufactured_backward_euler(self):
        grid = Grid.uniform(2.0, 0.5, 0.01)
        exact, f = _manufactured(grid, 1.0, 0.1)
        run = viscous_solve_1d(_advection([1.0]), 0.1, f, Scheme.BACKWARD_EULER_UPWIND)
        assert (run.solution - exact).sup_norm() < 2e-2
        assert run.as_dict()["scheme"] == "BackwardEulerUpwind"

    def test_unresolved_layer(self):
        grid = Grid.uniform(2.0, 0.5, 0.1)
        with pytest.raises(DimensionMismatch):
            viscous_solve_1d(_advection([1.0]), 0.01, DiscreteField.zeros(grid, 1))

    def test_two_dimensional_rejected(self):
        grid = Grid.uniform(1.0, 0.5, 0.01)
        with pytest.raises(DimensionMismatch):
            viscous_solve_1d(load_builtin("neueg"), 0.1, DiscreteField.zeros(grid, 2))

    def test_support_reaches_outflow(self):
        grid = Grid.layer_resolving(0.1, 2.0, 2.0)
        initial = np.stack([gaussian_bump(grid.x)] * 2, axis=-1)
        with pytest.raises(SupportReachedOutflow):
            viscous_solve_1d(_advection([1.0, -1.0]), 0.1, DiscreteField.zeros(grid, 2), initial=initial)


class TestViscousQuasilinear:
    def test_close_to_outer_solution(self):
        model = load_builtin("scalar1d")
        grid = Grid.layer_resolving(0.1, 6.0, 1.0)
        f = cubic_forcing(grid, 1)
        run = viscous_solve_1d(model, 0.1, f)
        u0 = hyperbolic_solve_incoming(model, f)
        assert run.newton_iterations > 0
        assert (run.solution - u0).sup_norm() < 0.1


class TestFornet:
    def test_symmetric_parameters_give_equal_components(self):
        run = fornet_solve(1.0, 1.0, 0.1, Grid.layer_resolving(0.1, 8.0, 2.0))
        values = run.viscous.solution.values
        assert np.abs(values[..., 0] - values[..., 1]).max() < 1e-10

    def test_limit_keeps_boundary_relation(self):
        run = fornet_solve(1.0, 2.0, 0.1, Grid.layer_resolving(0.1, 8.0, 2.0))
        trace = run.limit.trace()
        # Γ₁ = (1, −1): the limit trace stays on the diagonal
        assert np.abs(trace[:, 0] - trace[:, 1]).max() < 1e-8
        assert run.l2_difference > 0

    @pytest.mark.slow
    def test_difference_decreases_with_epsilon(self):
        diffs = [fornet_solve(1.0, 2.0, e, Grid.layer_resolving(e, 8.0, 2.0)).l2_difference for e in (0.1, 0.05, 0.025)]
        assert diffs[0] > diffs[1] > diffs[2]


class TestWeightedRatios:
    def test_positive_and_keyed_by_gamma(self):
        grid = Grid.uniform(2.0, 1.0, 0.02)
        f = cubic_forcing(grid, 1)
        ratios = weighted_ratios(f, f, gammas=(2.0, 4.0))
        assert set(ratios) == {2.0, 4.0}
        assert all(v > 0 for v in ratios.values())


class TestExponentialProfile:
    def test_l2_squared_matches_quadrature(self):
        p = ExponentialProfile((1.0, 3.0), np.array([[1.0, 0.0], [2.0, 1.0]], dtype=complex))
        numeric = quad(lambda x: float(np.sum(np.abs(p(x)) ** 2)), 0, np.inf)[0]
        assert p.l2_squared() == pytest.approx(numeric, rel=1e-8)

    def test_rates_positive(self):
        with pytest.raises(ValueError):
            ExponentialProfile.single(0.0, [1.0])


class TestResolventODE:
    zeta = Frequency(0.01, 0.02)

    def test_boundary_condition_and_equation(self):
        model = load_builtin("fornet")
        fh = ExponentialProfile.single(1.0, [1.0, 0.5])
        fp = ExponentialProfile.single(2.0, [0.0, 1.0])
        g = np.array([0.3, -0.2])
        sol = resolvent_ode_solve(model, self.zeta, fh, fp, g)
        assert np.allclose(sol.H @ sol.u_H(0.0)[0] + sol.u_P(0.0)[0], g)
        x, h = 0.7, 1e-5
        deriv = (sol.u_H(x + h)[0] - sol.u_H(x - h)[0]) / (2 * h)
        assert np.allclose(deriv, sol.H @ sol.u_H(x)[0] + fh(x)[0], atol=1e-6)
        deriv_p = (sol.u_P(x + h)[0] - sol.u_P(x - h)[0]) / (2 * h)
        assert np.allclose(deriv_p, sol.P @ sol.u_P(x)[0] + fp(x)[0], atol=1e-6)

    def test_closed_form_norm(self):
        model = load_builtin("fornet")
        fh = ExponentialProfile.single(1.0, [1.0, 0.0])
        sol = resolvent_ode_solve(model, self.zeta, fh, ExponentialProfile.zero(2), np.zeros(2))
        numeric = quad(lambda x: float(np.sum(np.abs(sol.u_H(x)[0]) ** 2)), 0, np.inf, limit=400)[0]
        assert sol.norm_H**2 == pytest.approx(numeric, rel=1e-4)

    def test_zero_profile(self):
        assert np.all(ExponentialProfile.zero(2)(np.linspace(0, 1, 3)) == 0)
        assert ExponentialProfile.zero(2).l2_squared() == 0.0

    def test_canonical_data_count(self):
        assert len(list(canonical_data(3))) == 9

    def test_estimate_constant_bounded(self):
        model = load_builtin("inceg")
        zetas = [Frequency(0.01, 0.01, (0.01,)), Frequency(0.0, 0.02, (0.0,)), Frequency(0.02, 0.001, (-0.01,))]
        c, where = resolvent_estimate_constant(model, zetas)
        assert np.isfinite(c) and c > 0
        assert where in zetas
