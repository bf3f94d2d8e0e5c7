from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="LAB_"
    )

    ENV: str = "local"
    LOG_LEVEL: str = "INFO"

    OUT_DIR: Path = Path("out")
    JOBS: int = 1
    SEED: int = 0

    EIG_TOL: float = 1e-9
    RANK_TOL: float = 1e-10
    UNIFORM_THRESHOLD: float = 1e-3
    ZERO_TOL: float = 1e-8
    CLUSTER_RADIUS: float = 1e-6

    GRID_POINTS: int = 64
    GAMMA_LEVELS: list[float] = [
        0.0, 1e-3, 1e-2, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
    ]
    EXTRAPOLATION_GAMMAS: list[float] = [1e-2, 1e-3, 1e-4]

    NEWTON_TOL: float = 1e-10
    NEWTON_MAX_ITER: int = 50
    LAYER_RESOLUTION: int = 4

    CORS_ORIGINS: list[str] = ["http://localhost:5173", "http://127.0.0.1:5173"]

    @property
    def is_prod(self) -> bool:
        return self.ENV.lower() == "prod"


settings = Settings()
