from fastapi import APIRouter
from fastapi.responses import JSONResponse

from app.analysis.studies import convergence_study
from app.core.config import settings
from app.core.logging import run_id_ctx
from app.schemas.report import ConvergenceReport, report_payload
from app.schemas.requests import ConvergeRequest

router = APIRouter(prefix="/converge", tags=["convergence"])


@router.post("", response_model=ConvergenceReport)
def converge(payload: ConvergeRequest):
    report, _ = convergence_study(
        payload.resolve(),
        payload.epsilons,
        payload.X,
        payload.T,
        payload.perEpsilon,
        payload.scheme,
        payload.weighted,
        settings.JOBS,
    )
    report.runId = run_id_ctx.get()
    return JSONResponse(report_payload(report))
