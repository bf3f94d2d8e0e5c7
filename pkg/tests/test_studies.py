import numpy as np
import pytest

from app.analysis.cauchy import cauchy_diagnostics
from app.analysis.lopatinski import reduce
from app.analysis.solvers import Scheme
from app.analysis.studies import (
    CONVERGENCE_COLUMNS,
    EXPANSION_COLUMNS,
    STABILITY_COLUMNS,
    cauchy_summary,
    convergence_study,
    evans_study,
    expansion_study,
    fitted_slope,
    glancing_locations,
    stability_study,
)
from app.models.loader import load_builtin


class TestFittedSlope:
    def test_power_law(self):
        x = np.array([0.1, 0.05, 0.025])
        assert fitted_slope(x, 3 * x**2) == pytest.approx(2.0)

    def test_too_few_points(self):
        assert np.isnan(fitted_slope([0.1, 0.05], [1.0, 0.0]))


class TestStabilityStudy:
    def test_inceg_uniform(self):
        report, rows = stability_study(load_builtin("inceg"), points=16, gamma_levels=[0.0, 0.5, 1.0])
        assert report.lopatinski.case == "CaseII"
        assert report.lopatinski.verdict == "UNIFORM"
        assert rows and set(rows[0]) == set(STABILITY_COLUMNS)
        assert report.cauchy is not None

    def test_scalar_skips_cauchy(self):
        report, _ = stability_study(load_builtin("scalar1d"), points=8, gamma_levels=[0.0, 1.0])
        assert report.cauchy is None
        assert report.command == "stability"

    def test_glancing_locations_reported(self):
        report, _ = stability_study(
            load_builtin("neueg", alpha=0.0), points=8, gamma_levels=[0.0, 1.0], cauchy=False
        )
        at_minus_one = [g for g in report.lopatinski.glancing if g.eta == [-1.0]]
        assert sorted(g.tau for g in at_minus_one) == pytest.approx([-1.0, 1.0], abs=1e-8)
        assert all(abs(g.xi) < 1e-6 for g in at_minus_one)

    def test_no_glancing_in_one_dimension(self):
        assert glancing_locations(load_builtin("fornet")) == []

    def test_block_resolvent_summarised(self):
        model = load_builtin("badinceg")
        reduced = reduce(model)
        summary = cauchy_summary(model, cauchy_diagnostics(model, reduced, points=8), reduced)
        assert summary.sharpScalarMin is None
        assert summary.blockResolvent is not None
        assert summary.blockResolvent.stable is False

    def test_rao_metadata_kept(self):
        report, _ = stability_study(load_builtin("rao"), points=8, gamma_levels=[0.0, 1.0], cauchy=False)
        assert "soundSpeed" in report.metadata
        assert report.cauchy is None


class TestEvansStudy:
    def test_fornet_summary(self):
        report, rows = evans_study(load_builtin("fornet"), radii=3, points=4)
        assert report.summary.rows == len(rows) > 0
        assert report.summary.minRatio > 0
        assert all(r["ratio"] == pytest.approx(r["R"] / (r["gamma"] + r["rho"] ** 2)) for r in rows)


class TestExpansionStudy:
    def test_cascade_pipeline(self):
        report, rows = expansion_study(load_builtin("scalar1d"), order=2, epsilons=[0.1, 0.05], dx=0.04)
        assert report.pipeline == "cascade"
        assert len(report.traces) == 2
        assert [set(r) for r in rows] == [set(EXPANSION_COLUMNS)] * 2

    def test_filtered_pipeline(self):
        report, rows = expansion_study(load_builtin("eg2"), order=0, X=3.0, T=0.5, dx=0.05, mode=0.0)
        assert report.pipeline == "filtered"
        assert rows == []
        assert report.options["case"] == "CaseII"
        assert report.outerResidual is not None


class TestConvergenceStudy:
    def test_limit_pipeline_for_dirichlet_rows(self):
        report, rows = convergence_study(
            load_builtin("fornet"), epsilons=[0.2, 0.1], X=4.0, T=1.0, per_epsilon=4
        )
        assert report.pipeline == "limit"
        assert report.scheme == Scheme.CRANK_NICOLSON_CENTERED.value
        assert [set(r) for r in rows] == [set(CONVERGENCE_COLUMNS)] * 2

    @pytest.mark.slow
    def test_neumann_pipeline_monotone(self):
        report, _ = convergence_study(load_builtin("scalar1d"), epsilons=[0.1, 0.05, 0.025])
        assert report.pipeline == "neumann"
        assert report.monotone
        assert report.l2Slope > 0
