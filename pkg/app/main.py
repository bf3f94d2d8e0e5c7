import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from starlette.exceptions import HTTPException as StarletteHTTPException
from starlette.middleware.base import BaseHTTPMiddleware

from app.core.config import settings
from app.core.errors import (
    LabError,
    http_exception_handler,
    lab_exception_handler,
    unhandled_exception_handler,
    validation_exception_handler,
)
from app.core.logging import configure_logging, run_scope
from app.routers.convergence import router as convergence_router
from app.routers.evans import router as evans_router
from app.routers.expansion import router as expansion_router
from app.routers.models import router as models_router
from app.routers.stability import router as stability_router

configure_logging(settings.LOG_LEVEL)
logger = logging.getLogger("app")


class RunIdMiddleware(BaseHTTPMiddleware):
    async def dispatch(self, request: Request, call_next):
        with run_scope(request.headers.get("x-run-id")) as rid:
            response = await call_next(request)
            response.headers["x-run-id"] = rid
            return response


app = FastAPI(title="Boundary Layer Lab API", docs_url=None if settings.is_prod else "/docs")
app.add_middleware(RunIdMiddleware)
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


app.include_router(models_router)
app.include_router(stability_router)
app.include_router(evans_router)
app.include_router(expansion_router)
app.include_router(convergence_router)


app.add_exception_handler(LabError, lab_exception_handler)
app.add_exception_handler(StarletteHTTPException, http_exception_handler)
app.add_exception_handler(RequestValidationError, validation_exception_handler)
app.add_exception_handler(Exception, unhandled_exception_handler)


@app.get("/health")
def health():
    return {"ok": True}


@app.get("/")
def root():
    return {"status": "ok", "docs": app.docs_url}
