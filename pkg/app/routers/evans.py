from typing import Any

from fastapi import APIRouter
from fastapi.responses import JSONResponse

from app.analysis.studies import evans_study
from app.core.config import settings
from app.core.logging import run_id_ctx
from app.schemas.report import EvansReport, report_payload
from app.schemas.requests import EvansRequest

router = APIRouter(prefix="/evans", tags=["evans"])


class EvansOut(EvansReport):
    rows: list[dict[str, Any]] = []


@router.post("", response_model=EvansOut)
def evans_scan(payload: EvansRequest):
    report, rows = evans_study(payload.resolve(), payload.radius, payload.radii, payload.points, settings.JOBS)
    report.runId = run_id_ctx.get()
    out = EvansOut.model_validate({**report.model_dump(), "rows": rows})
    return JSONResponse(report_payload(out))
