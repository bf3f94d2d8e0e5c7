import numpy as np
import pytest

from app.analysis.acceptance import (
    CRITERIA,
    TAGS,
    Context,
    Criterion,
    deterministic_rerun,
    parser_roundtrip,
    projector_identities,
    random_ast,
    run_acceptance,
    run_criterion,
    unitary_invariance,
)
from app.core.errors import DimensionMismatch, ModelError
from app.models.expr import parse_expr, to_text


class TestCatalogue:
    def test_numbered_in_order(self):
        assert [c.number for c in CRITERIA] == list(range(1, 15))
        assert {c.tag for c in CRITERIA} == set(TAGS)

    def test_quick_context(self):
        assert Context(quick=True).points == 32
        assert Context().epsilons[-1] == 0.0125
        assert Context(seed=3).rng(1).integers(100) == np.random.default_rng(4).integers(100)


class TestPropertySuites:
    def test_projectors(self, rng):
        assert projector_identities(rng, trials=20) < 1e-8

    def test_unitary_invariance(self, rng):
        assert unitary_invariance(rng, trials=20) < 1e-10

    def test_parser_roundtrip(self, rng):
        assert parser_roundtrip(rng, trials=200) == 0

    def test_random_ast_prints_and_parses(self, rng):
        node = random_ast(rng, 2)
        assert parse_expr(to_text(node), 2) == node

    def test_deterministic_rerun(self):
        assert deterministic_rerun(jobs=2)


class TestRunner:
    def test_unknown_tag(self):
        with pytest.raises(ModelError):
            run_acceptance({"nosuch"})

    def test_error_recorded(self):
        def boom(ctx):
            raise DimensionMismatch("no")

        result = run_criterion(Criterion(99, "property", "raises", boom), Context())
        assert not result.passed
        assert result.error == "DimensionMismatch: no"

    def test_property_only(self):
        report = run_acceptance({"property"}, quick=True)
        assert [c.tag for c in report.criteria] == ["property"]
        assert report.passed == report.criteria[0].passed
        assert report.criteria[0].passed


@pytest.mark.slow
class TestFullQuickRun:
    def test_all_criteria_pass(self):
        report = run_acceptance(quick=True)
        failed = [(c.number, c.title, c.error, c.details) for c in report.criteria if not c.passed]
        assert failed == []
