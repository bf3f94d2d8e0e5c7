"""Tests for the reduced boundary conditions and the uniform Lopatinski scan."""
import math

import numpy as np
import pytest

from app.analysis.frequency import Frequency
from app.analysis.lopatinski import (
    Case,
    Verdict,
    boundary_stack,
    classify_case,
    glancing_detector,
    reduce,
    rescaled_boundary_symbol,
    scan_uniform,
    uniform_lop_det,
    unstable_space,
)
from app.core.errors import NumericError, ZeroFrequency
from app.models.loader import from_model_file, load_builtin, parse_model_file

LEVELS = [0.0, 1e-3, 0.1, 0.5, 1.0]


def _outgoing_dirichlet():
    return from_model_file(
        parse_model_file(
            {
                "name": "outgoing",
                "d": 1,
                "N": 1,
                "matrices": [[[1.0]], [[-1.0]]],
                "gamma1": [[1.0]],
                "baseState": [0.0],
            }
        )
    )


class TestClassification:
    @pytest.mark.parametrize(
        "name, D, I, case",
        [
            ("neueg", 0, 1, Case.CASE_II),
            ("inceg", 1, 2, Case.CASE_II),
            ("eg2", 1, 2, Case.CASE_II),
            ("rao", 3, 4, Case.CASE_II),
        ],
    )
    def test_counts(self, name, D, I, case):  # noqa: E741
        c = classify_case(load_builtin(name))
        assert (c.D, c.I, c.case) == (D, I, case)
        assert c.I + c.O == load_builtin(name).N

    def test_case_i(self):
        model = _outgoing_dirichlet()
        reduced = reduce(model)
        assert reduced.classification.case is Case.CASE_I
        assert reduced.gamma_tilde1.shape == (0, 1)
        assert reduced.X.shape == (1, 1)

    def test_case_ii_reduction_annihilates_stable_space(self):
        model = load_builtin("neueg")
        reduced = reduce(model)
        assert reduced.gamma_tilde2.shape[0] == 1
        # outgoing eigenvector of A_d = diag(1.3, -0.7) is e2
        assert abs(reduced.gamma_tilde2[0, 1]) < 1e-12


class TestSymbols:
    def test_rescaled_symbol_undefined_at_zero(self):
        model = load_builtin("neueg")
        with pytest.raises(ZeroFrequency):
            rescaled_boundary_symbol(model, reduce(model), Frequency(0.0, 0.0, (0.0,)))

    def test_rescaled_symbol_homogeneous(self):
        model = load_builtin("neueg")
        reduced = reduce(model)
        z = Frequency(0.3, 0.2, (-0.5,))
        assert np.allclose(
            rescaled_boundary_symbol(model, reduced, z), rescaled_boundary_symbol(model, reduced, z.scaled(7.0))
        )

    def test_stack_includes_dirichlet_rows(self):
        model = load_builtin("inceg")
        stack = boundary_stack(model, reduce(model), Frequency(0.0, 1.0, (0.0,)))
        assert stack.shape == (2, 2)

    def test_unstable_space_dimension(self):
        model = load_builtin("neueg")
        space, limit = unstable_space(model, Frequency(0.6, 0.8, (0.0,)))
        assert space.dim == 1
        assert not limit

    def test_glancing_limit(self):
        model = load_builtin("neueg")
        # γ = 0 with a real characteristic root: the split needs the γ ↓ 0 limit
        hits = 0
        for phi in np.linspace(0, 2 * np.pi, 16, endpoint=False):
            z = Frequency(math.cos(phi), 0.0, (math.sin(phi),))
            try:
                _, limit = unstable_space(model, z)
            except NumericError:
                continue
            hits += limit
        assert hits >= 1


class TestUniformDet:
    def test_badinceg_root(self):
        model = load_builtin("badinceg")
        root = Frequency(0.5, math.sqrt(3) / 2, (-1.0,)).hat
        assert uniform_lop_det(model, reduce(model), root).abs_det < 1e-8

    def test_neueg_degenerates_towards_axis(self):
        model = load_builtin("neueg")
        reduced = reduce(model)
        dets = [uniform_lop_det(model, reduced, Frequency(1.0, g, (-1.0,))).abs_det for g in (1e-2, 1e-3, 1e-4)]
        assert dets[0] > dets[1] > dets[2]
        assert dets[-1] < 0.1

    def test_record_fields(self):
        model = load_builtin("inceg")
        rec = uniform_lop_det(model, reduce(model), Frequency(0.0, 1.0, (0.0,)))
        assert rec.abs_det > 0
        assert 0 < rec.min_singular <= 1.0 + 1e-12
        assert np.isfinite(rec.well_cond)


class TestScan:
    def test_inceg_uniform(self):
        scan = scan_uniform(load_builtin("inceg"), points=16, gamma_levels=LEVELS)
        assert scan.verdict is Verdict.UNIFORM
        assert scan.min_abs_det >= 1e-3
        assert scan.lopsat_consistent
        assert scan.failed == 0

    def test_badinceg_fails_weak(self):
        scan = scan_uniform(load_builtin("badinceg"), points=32)
        assert scan.verdict is Verdict.FAILS_WEAK
        assert scan.refined_witness is not None

    def test_neueg_weak_only(self):
        scan = scan_uniform(load_builtin("neueg"), points=32)
        assert scan.verdict is Verdict.WEAK_ONLY

    def test_parallel_scan_matches_serial(self):
        model = load_builtin("inceg")
        a = scan_uniform(model, points=8, gamma_levels=LEVELS, jobs=1, refine_starts=1)
        b = scan_uniform(model, points=8, gamma_levels=LEVELS, jobs=4, refine_starts=1)
        assert [r.det_uniform for r in a.records] == [r.det_uniform for r in b.records]


class TestGlancing:
    def test_one_dimensional_has_none(self):
        assert glancing_detector(load_builtin("fornet"), ()) == []

    def test_points_are_stationary(self):
        model = load_builtin("neueg")
        for p in glancing_detector(model, (1.0,), samples=201):
            assert abs(p.derivative) < 1e-6
            assert p.tau == pytest.approx(-p.eigenvalue)

    def test_undrifted_wave_glances_at_normal_incidence(self):
        points = glancing_detector(load_builtin("neueg", alpha=0.0), (-1.0,))
        assert len(points) == 2
        assert all(abs(p.xi) < 1e-6 for p in points)
        assert sorted(p.tau for p in points) == pytest.approx([-1.0, 1.0], abs=1e-8)

    @pytest.mark.parametrize("alpha", [0.3, 0.5])
    def test_drift_moves_glancing_off_the_failure_frequency(self, alpha):
        points = glancing_detector(load_builtin("neueg", alpha=alpha), (-1.0,))
        speed = math.sqrt(1 - alpha**2)
        assert sorted(p.tau for p in points) == pytest.approx([-speed, speed], abs=1e-8)
        assert sorted(abs(p.xi) for p in points) == pytest.approx([alpha / speed] * 2, abs=1e-6)
        assert all(abs(p.tau - 1.0) > 0.04 for p in points)
