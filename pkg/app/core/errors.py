import logging

from fastapi import Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

logger = logging.getLogger("app.errors")


class LabError(Exception):
    exit_code = 3
    status_code = 422


# --- model / input errors -------------------------------------------------


class ModelError(LabError):
    exit_code = 2


class SchemaError(ModelError):
    pass


class InvariantViolation(ModelError):
    def __init__(self, check: str, message: str):
        super().__init__(f"{check}: {message}")
        self.check = check


class ExpressionSyntaxError(ModelError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ModelError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class GuardedDivision(ModelError):
    pass


class ExpressionDomainError(ModelError):
    pass


# --- numerical errors -----------------------------------------------------


class NumericError(LabError):
    exit_code = 3


class NonSquare(NumericError):
    pass


class NumericalFailure(NumericError):
    pass


class GlancingOrCharacteristic(NumericError):
    pass


class DimensionMismatch(NumericError):
    pass


class RankDeficient(NumericError):
    pass


class NotInStableSubspace(NumericError):
    pass


class SingularAd(NumericError):
    pass


class ClustersNotSeparated(NumericError):
    pass


class ContractionDiverged(NumericError):
    pass


class SingularH(NumericError):
    pass


class CharacteristicBoundary(NumericError):
    pass


class TransversalityFailure(NumericError):
    pass


class ZeroFrequency(NumericError):
    pass


class GlancingLimitFailure(NumericError):
    pass


class NotEvolutionary(NumericError):
    pass


class NotEvolutionaryAtPoint(NumericError):
    pass


class WrongShape(NumericError):
    pass


class RankConditionFails(NumericError):
    pass


class NonSymmetric(NumericError):
    pass


class TraceNotInStableSubspace(NumericError):
    pass


class SolvabilityResidualLarge(NumericError):
    pass


class AdNotPositive(NumericError):
    pass


class NonlinearSolveDiverged(NumericError):
    pass


class CFLBlowup(NumericError):
    pass


class SupportReachedOutflow(NumericError):
    pass


class NonCommutingLayer(NumericError):
    pass


# --- HTTP handlers --------------------------------------------------------


def lab_exception_handler(request: Request, exc: LabError):
    logger.info("%s path=%s: %s", type(exc).__name__, request.url.path, exc)
    return JSONResponse(
        status_code=exc.status_code,
        content={"detail": str(exc), "error": type(exc).__name__},
    )


def http_exception_handler(request: Request, exc: StarletteHTTPException):
    logger.info("HTTPException %s path=%s", exc.status_code, request.url.path)
    return JSONResponse(status_code=exc.status_code, content={"detail": exc.detail})


def validation_exception_handler(request: Request, exc: RequestValidationError):
    logger.info("ValidationError path=%s", request.url.path)
    return JSONResponse(status_code=422, content={"detail": "Invalid request"})


def unhandled_exception_handler(request: Request, exc: Exception):
    # stack trace stays server-side
    logger.exception("UnhandledException path=%s", request.url.path)
    return JSONResponse(status_code=500, content={"detail": "Internal Server Error"})
