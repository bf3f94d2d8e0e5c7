import json
import logging
from pathlib import Path

from pydantic import ValidationError

from app.core.errors import SchemaError
from app.models.hp_model import HyperbolicParabolicModel, build_model
from app.models.registry import BUILTINS
from app.schemas.model_file import ModelFile

logger = logging.getLogger("app.models")

BUILTIN_PREFIX = "builtin:"


def parse_model_file(data: dict | str | bytes) -> ModelFile:
    try:
        if isinstance(data, dict):
            return ModelFile.model_validate(data)
        return ModelFile.model_validate_json(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        raise SchemaError(f"{where or 'model'}: {first.get('msg')}") from exc


def from_model_file(spec: ModelFile, metadata: dict | None = None) -> HyperbolicParabolicModel:
    model = build_model(spec)
    model.metadata = dict(metadata or {})
    model.validate()
    logger.info(
        "loaded model %s (d=%d, N=%d, D=%d, Nn=%d, incoming=%s)",
        model.name,
        model.d,
        model.N,
        model.n_dirichlet,
        model.n_neumann,
        model.diagnostics["totallyIncoming"],
    )
    return model


def load_builtin(name: str, **overrides: float) -> HyperbolicParabolicModel:
    builtin = BUILTINS.get(name)
    if builtin is None:
        raise SchemaError(f"unknown builtin model {name!r}; known: {sorted(BUILTINS)}")
    return from_model_file(builtin.model_file(**overrides), builtin.model_metadata(**overrides))


def load_model(source: str | Path, **overrides: float) -> HyperbolicParabolicModel:
    """Load ``builtin:<name>`` or a JSON model file.

    Parameter overrides apply to builtins and to the ``params`` of a file.
    """
    text = str(source)
    if text.startswith(BUILTIN_PREFIX):
        return load_builtin(text[len(BUILTIN_PREFIX) :], **overrides)
    path = Path(source)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SchemaError(f"cannot read model file {path}: {exc}") from exc
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path} is not UTF-8 JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: top level must be an object")
    if overrides:
        payload.setdefault("params", {}).update({k: float(v) for k, v in overrides.items()})
    return from_model_file(parse_model_file(payload))


def serialize_model(model: HyperbolicParabolicModel) -> str:
    return json.dumps(model.to_model_file().model_dump(mode="json"), indent=2, sort_keys=True)


def save_model(model: HyperbolicParabolicModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(serialize_model(model) + "\n", encoding="utf-8")
    return path
