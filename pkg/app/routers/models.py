import json

from fastapi import APIRouter, HTTPException, Request

from app.core.errors import SchemaError
from app.models.loader import load_builtin, serialize_model
from app.models.registry import BUILTINS, registry
from app.schemas.model_file import BuiltinOut

router = APIRouter(prefix="/models", tags=["models"])


@router.get("", response_model=list[BuiltinOut])
def list_models():
    return [BuiltinOut(name=b.name, description=b.description, params=b.defaults) for b in registry()]


@router.get("/{name}")
def get_model(name: str, request: Request):
    if name not in BUILTINS:
        raise HTTPException(status_code=404, detail="Model not found")
    try:
        overrides = {k: float(v) for k, v in request.query_params.items()}
    except ValueError as exc:
        raise SchemaError("parameter overrides must be numbers") from exc
    return json.loads(serialize_model(load_builtin(name, **overrides)))
