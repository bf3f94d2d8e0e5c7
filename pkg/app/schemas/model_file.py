from pydantic import BaseModel, ConfigDict, Field, model_validator

Entry = float | str


class ModelFlags(BaseModel):
    model_config = ConfigDict(extra="forbid")

    symmetric: bool = False
    totallyIncoming: bool | None = None


class ModelFile(BaseModel):
    """On-disk model description (UTF-8 JSON)."""

    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1, max_length=120)
    d: int = Field(ge=1, le=3)
    N: int = Field(ge=1, le=16)
    matrices: list[list[list[Entry]]]
    gamma1: list[list[float]] = []
    gamma2: list[list[float]] = []
    baseState: list[float]
    flags: ModelFlags = ModelFlags()
    params: dict[str, float] = {}

    @model_validator(mode="after")
    def _shapes(self) -> "ModelFile":
        if len(self.matrices) != self.d + 1:
            raise ValueError(f"expected {self.d + 1} matrices, got {len(self.matrices)}")
        for j, m in enumerate(self.matrices):
            if len(m) != self.N or any(len(row) != self.N for row in m):
                raise ValueError(f"matrix {j} is not {self.N}x{self.N}")
        for label, rows in (("gamma1", self.gamma1), ("gamma2", self.gamma2)):
            if any(len(row) != self.N for row in rows):
                raise ValueError(f"{label} rows must have {self.N} entries")
        if len(self.baseState) != self.N:
            raise ValueError(f"baseState must have {self.N} entries")
        return self


class BuiltinOut(BaseModel):
    name: str
    description: str
    params: dict[str, float]
