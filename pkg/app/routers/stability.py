from fastapi import APIRouter
from fastapi.responses import JSONResponse

from app.analysis.studies import stability_study
from app.core.config import settings
from app.core.logging import run_id_ctx
from app.schemas.report import StabilityReport, report_payload
from app.schemas.requests import StabilityRequest

router = APIRouter(prefix="/stability", tags=["stability"])


@router.post("", response_model=StabilityReport)
def stability(payload: StabilityRequest):
    model = payload.resolve()
    report, _ = stability_study(model, payload.points, payload.gammaLevels, settings.JOBS, payload.cauchy)
    report.runId = run_id_ctx.get()
    return JSONResponse(report_payload(report))
