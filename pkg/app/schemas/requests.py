from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.analysis.solvers import Scheme
from app.core.errors import SchemaError
from app.models.hp_model import HyperbolicParabolicModel
from app.models.loader import from_model_file, load_builtin
from app.schemas.model_file import ModelFile


class ModelRequest(BaseModel):
    """Either ``{"builtin": name, "params": {...}}`` or a model file object, plus options."""

    model_config = ConfigDict(extra="forbid")

    builtin: str | None = None
    params: dict[str, float] = {}
    file: ModelFile | None = None

    @model_validator(mode="before")
    @classmethod
    def _inline_file(cls, data: Any) -> Any:
        if isinstance(data, dict) and "matrices" in data:
            keys = set(ModelFile.model_fields)
            file = {k: v for k, v in data.items() if k in keys}
            rest = {k: v for k, v in data.items() if k not in keys}
            return {**rest, "file": file}
        return data

    def resolve(self) -> HyperbolicParabolicModel:
        if self.file is not None:
            return from_model_file(self.file)
        if self.builtin is None:
            raise SchemaError("request needs a builtin name or a model file")
        return load_builtin(self.builtin, **self.params)


class StabilityRequest(ModelRequest):
    points: int | None = Field(default=None, ge=2, le=512)
    gammaLevels: list[float] | None = None
    cauchy: bool = True


class EvansRequest(ModelRequest):
    radius: float = Field(default=0.05, gt=0, le=0.5)
    radii: int = Field(default=6, ge=2, le=32)
    points: int = Field(default=16, ge=2, le=128)


class ExpandRequest(ModelRequest):
    order: int = Field(default=1, ge=0, le=3)
    epsilons: list[float] | None = None
    X: float = Field(default=6.0, gt=0)
    T: float = Field(default=1.0, gt=0)
    dx: float = Field(default=0.02, gt=0)
    mode: float = 1.0


class ConvergeRequest(ModelRequest):
    epsilons: list[float] = [0.1, 0.05, 0.025]
    X: float | None = None
    T: float | None = None
    perEpsilon: int = Field(default=8, ge=4, le=64)
    scheme: Scheme = Scheme.CRANK_NICOLSON_CENTERED
    weighted: bool = False
