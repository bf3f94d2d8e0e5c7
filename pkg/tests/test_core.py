import logging
import threading

import pytest

from app.core.errors import (
    CFLBlowup,
    ExpressionSyntaxError,
    InvariantViolation,
    LabError,
    ModelError,
    NumericError,
    SchemaError,
)
from app.core.logging import (
    LIBRARY_LOGGERS,
    RunIdFilter,
    configure_logging,
    model_ctx,
    new_run_id,
    run_id_ctx,
    run_scope,
)
from app.core.parallel import fan_out


class TestErrors:
    @pytest.mark.parametrize("exc, code", [(SchemaError("x"), 2), (CFLBlowup("x"), 3)])
    def test_exit_codes(self, exc, code):
        assert exc.exit_code == code
        assert exc.status_code == 422

    def test_families(self):
        assert issubclass(SchemaError, ModelError)
        assert issubclass(CFLBlowup, NumericError)
        assert issubclass(NumericError, LabError)

    def test_structured_fields(self):
        err = InvariantViolation("A0_identity", "A0 is not the identity")
        assert err.check == "A0_identity"
        assert "A0_identity" in str(err)
        assert ExpressionSyntaxError("unexpected token", 4).offset == 4


class TestRunId:
    def test_filter_stamps_current_id(self):
        token = run_id_ctx.set("abc")
        try:
            record = logging.LogRecord("t", logging.INFO, __file__, 1, "m", None, None)
            assert RunIdFilter().filter(record)
            assert record.run_id == "abc"
        finally:
            run_id_ctx.reset(token)

    def test_new_ids_differ(self):
        assert new_run_id() != new_run_id()
        assert len(new_run_id()) == 16

    def test_scope_binds_and_restores(self):
        with run_scope("run-1", "builtin:neueg") as rid:
            assert rid == "run-1"
            record = logging.LogRecord("t", logging.INFO, __file__, 1, "m", None, None)
            RunIdFilter().filter(record)
            assert (record.run_id, record.model) == ("run-1", "builtin:neueg")
        assert run_id_ctx.get() == "-"
        assert model_ctx.get() == "-"

    def test_scope_mints_id(self):
        with run_scope() as rid:
            assert len(rid) == 16
            assert run_id_ctx.get() == rid

    def test_library_loggers_quiet_unless_debug(self):
        root = logging.getLogger()
        handlers, level = list(root.handlers), root.level
        try:
            configure_logging("INFO")
            assert all(logging.getLogger(n).level == logging.WARNING for n in LIBRARY_LOGGERS)
            configure_logging("DEBUG")
            assert all(logging.getLogger(n).level == logging.DEBUG for n in LIBRARY_LOGGERS)
        finally:
            root.handlers[:] = handlers
            root.setLevel(level)


class TestFanOut:
    def test_order_kept(self):
        assert fan_out(lambda x: x * x, range(20), jobs=4) == [x * x for x in range(20)]

    def test_inline_for_one_job(self):
        seen = set()
        fan_out(lambda _: seen.add(threading.get_ident()), range(3), jobs=1)
        assert seen == {threading.get_ident()}

    def test_workers_see_run_id(self):
        token = run_id_ctx.set("worker-run")
        try:
            assert set(fan_out(lambda _: run_id_ctx.get(), range(6), jobs=3)) == {"worker-run"}
        finally:
            run_id_ctx.reset(token)
