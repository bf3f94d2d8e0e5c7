import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field

SCHEMA_VERSION = "1"


class Report(BaseModel):
    schemaVersion: Literal["1"] = SCHEMA_VERSION
    command: str
    runId: str = "-"
    model: str | None = None
    params: dict[str, float] = {}
    options: dict[str, Any] = {}


class FrequencyOut(BaseModel):
    tau: float
    gamma: float
    eta: list[float] = []


class GlancingOut(BaseModel):
    tau: float
    eta: list[float]
    xi: float


class LopatinskiSummary(BaseModel):
    case: str
    D: int
    Nn: int
    incoming: int
    outgoing: int
    verdict: str | None = None
    minAbsDet: float | None = None
    argmin: FrequencyOut | None = None
    minPositiveAbsDet: float | None = None
    refinedMin: float | None = None
    witness: FrequencyOut | None = None
    lopsatConsistent: bool = True
    maxWellCond: float | None = None
    glancingPoints: int = 0
    glancing: list[GlancingOut] = []
    failedPoints: int = 0
    error: str | None = None


class WitnessOut(BaseModel):
    zeta0: FrequencyOut
    eta: list[float]
    detail: str


class ResolventOut(BaseModel):
    constant: float
    refinedConstant: float
    stable: bool
    gammaExponent: float
    witness: FrequencyOut | None = None


class CauchySummary(BaseModel):
    evolutionary: bool
    weaklyHyperbolic: bool
    semisimple: bool
    constantMultiplicity: bool
    pureImaginary: bool
    offAxisSemisimple: bool
    offAxisConstantMultiplicity: bool
    offAxisPureImaginary: bool
    multiplicityPatterns: list[list[int]] = []
    witnesses: dict[str, list[WitnessOut]] = {}
    points: int = 0
    failedPoints: int = 0
    resolventConstant: float | None = None
    sharpScalarMin: float | None = None
    blockResolvent: ResolventOut | None = None
    boundaryDeterminant: float | None = None


class StabilityReport(Report):
    command: str = "stability"
    lopatinski: LopatinskiSummary
    cauchy: CauchySummary | None = None
    cauchyError: str | None = None
    metadata: dict[str, Any] = {}


class EvansSummary(BaseModel):
    rows: int
    skipped: int
    minRatio: float
    refinedMinRatio: float
    refinementStable: bool
    gammaRaySlope: float
    vanishes: bool
    ratioBand: float | None = None


class EvansReport(Report):
    command: str = "evans"
    summary: EvansSummary


class ExpansionRow(BaseModel):
    epsilon: float
    order: int
    residual: float


class ExpansionReport(Report):
    command: str = "expand"
    pipeline: Literal["cascade", "filtered"]
    order: int
    grid: dict[str, float]
    traces: list[float] = []
    residualSlope: float | None = None
    outerResidual: float | None = None
    layer: dict[str, Any] | None = None
    nextOrderResidual: float | None = None
    rows: list[ExpansionRow] = []


class ConvergenceRow(BaseModel):
    epsilon: float
    dx: float
    dt: float
    supError: float
    l2Error: float
    newtonIterations: int = 0


class ConvergenceReport(Report):
    command: str = "converge"
    pipeline: Literal["neumann", "limit"]
    scheme: str
    rows: list[ConvergenceRow]
    supSlope: float
    l2Slope: float
    monotone: bool
    weighted: dict[str, Any] | None = None


class CriterionResult(BaseModel):
    number: int
    tag: str
    title: str
    passed: bool
    seconds: float
    details: dict[str, Any] = {}
    error: str | None = None


class AcceptanceReport(Report):
    command: str = "accept"
    quick: bool = False
    seed: int = 0
    passed: bool
    criteria: list[CriterionResult] = Field(default_factory=list)


# --- writers --------------------------------------------------------------


def _clean(value):
    """Non-finite floats become null so the JSON stays standard."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_clean(v) for v in value]
    return value


def report_payload(report: BaseModel) -> dict:
    return _clean(report.model_dump(mode="json"))


def report_json(report: BaseModel) -> str:
    return json.dumps(report_payload(report), indent=2, sort_keys=True) + "\n"


def write_report(report: BaseModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json(report), encoding="utf-8")
    return path


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: str | Path, columns: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows), encoding="utf-8")
    return path
