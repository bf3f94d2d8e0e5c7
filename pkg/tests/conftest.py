import numpy as np
import pytest

from app.core.config import settings
from app.models.loader import load_builtin


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def builtin():
    return load_builtin


@pytest.fixture(autouse=True)
def _restore_tolerances():
    saved = {k: getattr(settings, k) for k in ("EIG_TOL", "RANK_TOL", "UNIFORM_THRESHOLD", "ZERO_TOL",
                                               "CLUSTER_RADIUS", "NEWTON_TOL", "JOBS", "SEED")}
    yield
    for k, v in saved.items():
        setattr(settings, k, v)
