"""Builtin models, each a parameterised :class:`ModelFile` factory."""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from app.core.errors import SchemaError
from app.schemas.model_file import ModelFile


@dataclass(frozen=True)
class Builtin:
    name: str
    description: str
    defaults: dict[str, float]
    build: Callable[..., ModelFile]
    metadata: Callable[..., dict] | None = None

    def model_file(self, **overrides: float) -> ModelFile:
        unknown = set(overrides) - set(self.defaults)
        if unknown:
            raise SchemaError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")
        params = {**self.defaults, **{k: float(v) for k, v in overrides.items()}}
        return self.build(**params)

    def model_metadata(self, **overrides: float) -> dict:
        if self.metadata is None:
            return {}
        return self.metadata(**{**self.defaults, **overrides})


def _file(name, matrices, gamma1, gamma2, base, params, symmetric=False, incoming=None):
    n = len(base)
    return ModelFile(
        name=name,
        d=len(matrices) - 1,
        N=n,
        matrices=matrices,
        gamma1=gamma1,
        gamma2=gamma2,
        baseState=list(map(float, base)),
        flags={"symmetric": symmetric, "totallyIncoming": incoming},
        params=params,
    )


def _eye(n: int) -> list[list[float]]:
    return np.eye(n).tolist()


def _neueg(alpha: float, name: str = "neueg") -> ModelFile:
    # wave equation with drift, full Neumann
    return _file(
        name,
        [_eye(2), [[0.0, 1.0], [1.0, 0.0]], [[1.0 + alpha, 0.0], [0.0, alpha - 1.0]]],
        [],
        _eye(2),
        [0.0, 0.0],
        {"alpha": alpha},
        symmetric=True,
        incoming=False,
    )


def neueg(alpha: float) -> ModelFile:
    return _neueg(alpha)


def neueg2(alpha: float) -> ModelFile:
    return _neueg(alpha, "neueg2")


def inceg(g11: float) -> ModelFile:
    return _file(
        "inceg",
        [_eye(2), [[0.0, 1.0], [1.0, 0.0]], _eye(2)],
        [[g11, 1.0]],
        [[1.0, 0.0]],
        [0.0, 0.0],
        {"g11": g11},
        symmetric=True,
        incoming=True,
    )


def badinceg(a: float, b: float) -> ModelFile:
    return _file(
        "badinceg",
        [_eye(3), [[0.0, 1.0, a], [1.0, 1.0, 0.0], [a, 0.0, 0.0]], _eye(3)],
        [[1.0, 1.0, b]],
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        [0.0, 0.0, 0.0],
        {"a": a, "b": b},
        symmetric=True,
        incoming=True,
    )


def fornet(alpha: float, beta: float) -> ModelFile:
    return _file(
        "fornet",
        [_eye(2), [[beta, 0.0], [0.0, alpha]]],
        [[1.0, -1.0]],
        [[1.0, 1.0]],
        [0.0, 0.0],
        {"alpha": alpha, "beta": beta},
        symmetric=True,
        incoming=True,
    )


def eg2(alpha: float, beta: float) -> ModelFile:
    return _file(
        "eg2",
        [
            _eye(3),
            [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        ],
        [[0.0, 1.0, 0.0]],
        [[1.0, 0.0, 0.0], [0.0, alpha, beta]],
        [0.0, 0.0, 0.0],
        {"alpha": alpha, "beta": beta},
        symmetric=True,
        incoming=False,
    )


def noest(theta: float, alpha: float) -> ModelFile:
    return _file(
        "noest",
        [_eye(2), [[theta, 1.0], [1.0, theta]], [[1.0 + alpha, 0.0], [0.0, alpha - 1.0]]],
        [],
        _eye(2),
        [0.0, 0.0],
        {"theta": theta, "alpha": alpha},
        symmetric=True,
        incoming=False,
    )


def rao(R: float, cv: float, rho: float, T: float, u: float, v: float) -> ModelFile:
    # state (ρ, u, v, T); ideal gas p = RρT
    a1 = [
        ["u2", "u1", 0.0, 0.0],
        ["R*u4/u1", "u2", 0.0, "R"],
        [0.0, 0.0, "u2", 0.0],
        [0.0, "R*u4/cv", 0.0, "u2"],
    ]
    a2 = [
        ["u3", 0.0, "u1", 0.0],
        [0.0, "u3", 0.0, 0.0],
        ["R*u4/u1", 0.0, "u3", "R"],
        [0.0, 0.0, "R*u4/cv", "u3"],
    ]
    return _file(
        "rao",
        [_eye(4), a1, a2],
        [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
        [[0.0, 0.0, 0.0, 1.0]],
        [rho, u, v, T],
        {"R": R, "cv": cv},
        incoming=None,
    )


SOUND_SPEED = "sqrt(R*u4*(1 + R/cv))"


def rao_energy_matrix(R: float, cv: float, rho: float, T: float, u: float, v: float) -> np.ndarray:
    """∂(ρ, ρu, ρv, ρE)/∂(ρ, u, v, T) with E = c_v T + |u|²/2."""
    e_tot = cv * T + 0.5 * (u * u + v * v)
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [u, rho, 0.0, 0.0],
            [v, 0.0, rho, 0.0],
            [e_tot, rho * u, rho * v, rho * cv],
        ]
    )


def rao_energy_matrix_inverse(R: float, cv: float, rho: float, T: float, u: float, v: float) -> np.ndarray:
    e_prime = cv * T - 0.5 * (u * u + v * v)
    k = 1.0 / (rho * cv)
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [-u / rho, 1.0 / rho, 0.0, 0.0],
            [-v / rho, 0.0, 1.0 / rho, 0.0],
            [-e_prime * k, -u * k, -v * k, k],
        ]
    )


def _rao_metadata(R, cv, rho, T, u, v) -> dict:
    c = math.sqrt(R * T * (1.0 + R / cv))
    p_rho = R * T
    return {
        "soundSpeed": c,
        "supersonic": 0.0 < c < v,
        "jordanBlockExpected": u == 0.0,
        "boundaryDeterminant": v * (v * v - p_rho),
        # recorded alongside, not asserted equal
        "boundaryDeterminantAlt": v * v - c * c + (R * rho * T) * (R * rho) / (rho * rho),
        "energyMatrix": rao_energy_matrix(R, cv, rho, T, u, v).tolist(),
        "energyMatrixInverse": rao_energy_matrix_inverse(R, cv, rho, T, u, v).tolist(),
    }


def scalar1d() -> ModelFile:
    return _file(
        "scalar1d",
        [[[1.0]], [["1 + u1^2/10"]]],
        [],
        [[1.0]],
        [0.0],
        {},
        symmetric=True,
        incoming=True,
    )


BUILTINS: dict[str, Builtin] = {
    b.name: b
    for b in [
        Builtin("neueg", "wave equation with drift, full Neumann", {"alpha": 0.3}, neueg),
        Builtin("inceg", "totally incoming, one Dirichlet and one Neumann row", {"g11": 0.5}, inceg),
        Builtin("badinceg", "totally incoming with a weak Lopatinski failure", {"a": 1.0, "b": -1.0}, badinceg),
        Builtin("fornet", "1-d transmission-type mixed system", {"alpha": 1.0, "beta": 2.0}, fornet),
        Builtin("eg2", "mixed conditions where the boundary Cauchy method works", {"alpha": 1.0, "beta": 2.0}, eg2),
        Builtin("neueg2", "wave equation with drift for the boundary Cauchy method", {"alpha": 0.3}, neueg2),
        Builtin("noest", "drifted wave system with non-semisimple boundary dynamics", {"theta": 0.5, "alpha": 0.0}, noest),
        Builtin(
            "rao",
            "linearised 2-d compressible flow, supersonic inflow",
            {"R": 1.0, "cv": 1.5, "rho": 1.0, "T": 1.0, "u": 1.0, "v": 2.0},
            rao,
            _rao_metadata,
        ),
        Builtin("scalar1d", "scalar quasilinear transport, A(u) = 1 + u²/10", {}, scalar1d),
    ]
}


def registry() -> list[Builtin]:
    return list(BUILTINS.values())
