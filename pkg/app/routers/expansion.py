from fastapi import APIRouter
from fastapi.responses import JSONResponse

from app.analysis.studies import expansion_study
from app.core.logging import run_id_ctx
from app.schemas.report import ExpansionReport, report_payload
from app.schemas.requests import ExpandRequest

router = APIRouter(prefix="/expand", tags=["expansion"])


@router.post("", response_model=ExpansionReport)
def expand(payload: ExpandRequest):
    # fields stay server-side; the report carries traces and residuals only
    report, _ = expansion_study(
        payload.resolve(), payload.order, payload.epsilons, payload.X, payload.T, payload.dx, payload.mode
    )
    report.runId = run_id_ctx.get()
    return JSONResponse(report_payload(report))
