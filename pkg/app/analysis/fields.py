"""Space-time grids and fields on the half line x ≥ 0."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from app.core.config import settings
from app.core.errors import DimensionMismatch


@dataclass(frozen=True)
class Grid:
    X: float
    T: float
    nx: int
    nt: int

    @classmethod
    def uniform(cls, X: float, T: float, dx: float, dt: float | None = None) -> "Grid":
        nx = int(math.ceil(X / dx - 1e-9)) + 1
        dt = dx / 2 if dt is None else dt
        nt = int(math.ceil(T / dt - 1e-9)) + 1
        return cls(X, T, nx, nt)

    @classmethod
    def layer_resolving(cls, epsilon: float, X: float, T: float, per_epsilon: int = 8) -> "Grid":
        """Δx = ε/per_epsilon, Δt = Δx/2."""
        return cls.uniform(X, T, epsilon / per_epsilon)

    @property
    def dx(self) -> float:
        return self.X / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.nt - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.X, self.nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)

    def resolves(self, epsilon: float) -> bool:
        return self.dx <= epsilon / settings.LAYER_RESOLUTION * (1 + 1e-12)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.X, self.T, factor * (self.nx - 1) + 1, factor * (self.nt - 1) + 1)

    def as_dict(self) -> dict:
        return {"X": self.X, "T": self.T, "nx": self.nx, "nt": self.nt, "dx": self.dx, "dt": self.dt}


@dataclass
class DiscreteField:
    """Values on a (t, x) grid, shape (nt, nx, N).

    ``mode`` is the tangential wavenumber k of d = 2 fields, which carry the
    complex amplitude of a single e^{ikx₁} mode.
    """

    grid: Grid
    values: np.ndarray
    mode: float = 0.0
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[..., None]
        if v.shape[:2] != (self.grid.nt, self.grid.nx):
            raise DimensionMismatch(f"field shape {v.shape} does not match grid {self.grid.nt}×{self.grid.nx}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"field {self.name or '?'} has non-finite values")
        self.values = v

    @classmethod
    def zeros(cls, grid: Grid, n: int, dtype=float, name: str = "", mode: float = 0.0) -> "DiscreteField":
        return cls(grid, np.zeros((grid.nt, grid.nx, n), dtype=dtype), mode, name)

    @classmethod
    def from_function(cls, grid: Grid, fn, name: str = "", mode: float = 0.0) -> "DiscreteField":
        """Sample ``fn(t, x)`` (broadcasting over (nt, nx), returning (..., N)); zero for t < 0."""
        tt, xx = np.meshgrid(grid.t, grid.x, indexing="ij")
        return cls(grid, np.asarray(fn(tt, xx)), mode, name)

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def _like(self, values, name: str | None = None) -> "DiscreteField":
        return DiscreteField(self.grid, values, self.mode, self.name if name is None else name)

    def _check(self, other: "DiscreteField"):
        if other.grid != self.grid or other.N != self.N:
            raise DimensionMismatch("fields live on different grids")

    def __add__(self, other: "DiscreteField") -> "DiscreteField":
        self._check(other)
        return self._like(self.values + other.values)

    def __sub__(self, other: "DiscreteField") -> "DiscreteField":
        self._check(other)
        return self._like(self.values - other.values)

    def __mul__(self, scalar: float) -> "DiscreteField":
        return self._like(scalar * self.values)

    __rmul__ = __mul__

    # --- derivatives ------------------------------------------------------

    def dx_field(self) -> "DiscreteField":
        return self._like(np.gradient(self.values, self.grid.dx, axis=1, edge_order=2), f"d_x {self.name}")

    def dt_field(self) -> "DiscreteField":
        return self._like(np.gradient(self.values, self.grid.dt, axis=0, edge_order=2), f"d_t {self.name}")

    def dxx_field(self) -> "DiscreteField":
        """Fourth-order central second derivative, second-order one-sided in the two edge nodes."""
        u = self.values
        h2 = self.grid.dx**2
        out = np.empty_like(u)
        out[:, 2:-2] = (
            -u[:, 4:] + 16 * u[:, 3:-1] - 30 * u[:, 2:-2] + 16 * u[:, 1:-3] - u[:, :-4]
        ) / (12 * h2)
        out[:, 0] = (2 * u[:, 0] - 5 * u[:, 1] + 4 * u[:, 2] - u[:, 3]) / h2
        out[:, 1] = (u[:, 2] - 2 * u[:, 1] + u[:, 0]) / h2
        out[:, -2] = (u[:, -1] - 2 * u[:, -2] + u[:, -3]) / h2
        out[:, -1] = (2 * u[:, -1] - 5 * u[:, -2] + 4 * u[:, -3] - u[:, -4]) / h2
        return self._like(out, f"d_xx {self.name}")

    def trace(self) -> np.ndarray:
        return self.values[:, 0, :]

    def normal_trace(self) -> np.ndarray:
        """∂_x at x = 0 by the one-sided three-point stencil, shape (nt, N)."""
        u = self.values
        return (-3 * u[:, 0] + 4 * u[:, 1] - u[:, 2]) / (2 * self.grid.dx)

    # --- norms ------------------------------------------------------------

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def l2_norm(self) -> float:
        """|u|_{L²((0,T)×(0,X))} by the trapezoidal rule."""
        sq = np.sum(np.abs(self.values) ** 2, axis=-1)
        return float(np.sqrt(trapezoid(trapezoid(sq, dx=self.grid.dx, axis=1), dx=self.grid.dt)))

    def weighted_norm(self, gamma: float) -> float:
        """|e^{−γt}u|_{L²}."""
        w = np.exp(-gamma * self.grid.t)[:, None, None]
        return self._like(w * self.values).l2_norm()

    # --- output -----------------------------------------------------------

    def as_dict(self) -> dict:
        v = self.values
        out = {
            "name": self.name,
            "dims": list(v.shape),
            "spacing": {"dt": self.grid.dt, "dx": self.grid.dx},
            "timeOrigin": 0.0,
            "mode": self.mode,
        }
        if np.iscomplexobj(v):
            out["real"] = v.real.ravel().tolist()
            out["imag"] = v.imag.ravel().tolist()
        else:
            out["values"] = v.ravel().tolist()
        return out

    def slice_rows(self, time_index: int = -1) -> list[list[float]]:
        """Rows (x, u_1, ..., u_N) at one time level."""
        v = self.values[time_index]
        return [[float(x), *map(float, np.real(row))] for x, row in zip(self.grid.x, v)]
