import json

from app.schemas.report import (
    CriterionResult,
    EvansReport,
    EvansSummary,
    csv_text,
    format_cell,
    report_json,
    write_csv,
    write_report,
)


def _evans_report(ratio: float) -> EvansReport:
    summary = EvansSummary(
        rows=3,
        skipped=0,
        minRatio=ratio,
        refinedMinRatio=ratio,
        refinementStable=True,
        gammaRaySlope=float("nan"),
        vanishes=True,
    )
    return EvansReport(model="fornet", params={"beta": 2.0, "alpha": 1.0}, summary=summary)


class TestReportJson:
    def test_keys_sorted_and_nan_null(self):
        text = report_json(_evans_report(0.5))
        data = json.loads(text)
        assert data["summary"]["gammaRaySlope"] is None
        assert data["schemaVersion"] == "1"
        assert data["command"] == "evans"
        assert list(data) == sorted(data)
        assert text.index('"alpha"') < text.index('"beta"')
        assert text.endswith("\n")

    def test_infinite_becomes_null(self):
        data = json.loads(report_json(_evans_report(float("inf"))))
        assert data["summary"]["minRatio"] is None

    def test_write_creates_parents(self, tmp_path):
        path = write_report(_evans_report(0.5), tmp_path / "nested" / "evans.json")
        assert json.loads(path.read_text(encoding="utf-8"))["model"] == "fornet"

    def test_criterion_defaults(self):
        c = CriterionResult(number=1, tag="lopatinski", title="t", passed=True, seconds=0.1)
        assert c.details == {} and c.error is None


class TestCsv:
    def test_format_cell(self):
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(True) == "true"
        assert format_cell(None) == ""
        assert format_cell(3) == "3"

    def test_columns_in_order(self):
        text = csv_text(["a", "b"], [{"b": 1.5, "a": "x"}, {"a": "y"}])
        assert text.splitlines() == ["a,b", "x,1.5", "y,"]

    def test_write_csv(self, tmp_path):
        path = write_csv(tmp_path / "scan.csv", ["epsilon"], [{"epsilon": 0.25}])
        assert path.read_text(encoding="utf-8") == "epsilon\n0.25\n"
