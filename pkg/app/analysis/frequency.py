from dataclasses import dataclass

import numpy as np

from app.core.config import settings


@dataclass(frozen=True)
class Frequency:
    """Laplace-Fourier point (τ, γ, η) with γ ≥ 0."""

    tau: float
    gamma: float
    eta: tuple[float, ...] = ()

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        object.__setattr__(self, "eta", tuple(float(e) for e in np.atleast_1d(self.eta)))

    @property
    def s(self) -> complex:
        return complex(self.gamma, self.tau)

    @property
    def eta_norm(self) -> float:
        return float(np.linalg.norm(self.eta)) if self.eta else 0.0

    @property
    def rho(self) -> float:
        return float(np.sqrt(self.tau**2 + self.gamma**2 + self.eta_norm**2))

    @property
    def is_zero(self) -> bool:
        return self.rho == 0.0

    @property
    def hat(self) -> "Frequency":
        r = self.rho
        if r == 0.0:
            raise ValueError("zero frequency has no direction")
        return self.scaled(1.0 / r)

    def scaled(self, s: float) -> "Frequency":
        return Frequency(s * self.tau, s * self.gamma, tuple(s * e for e in self.eta))

    def with_gamma(self, gamma: float) -> "Frequency":
        return Frequency(self.tau, gamma, self.eta)

    def as_dict(self) -> dict:
        return {"tau": self.tau, "gamma": self.gamma, "eta": list(self.eta)}

    @classmethod
    def from_dict(cls, data: dict) -> "Frequency":
        return cls(float(data["tau"]), float(data["gamma"]), tuple(data.get("eta", ())))


def hemisphere_point(gamma: float, phi: float, d: int, psi: float = 0.0) -> Frequency:
    r = float(np.sqrt(max(0.0, 1.0 - gamma * gamma)))
    if d == 1:
        return Frequency(r * (1.0 if np.cos(phi) >= 0 else -1.0), gamma)
    if d == 2:
        return Frequency(r * np.cos(phi), gamma, (r * np.sin(phi),))
    return Frequency(
        r * np.cos(phi), gamma, (r * np.sin(phi) * np.cos(psi), r * np.sin(phi) * np.sin(psi))
    )


def hemisphere_grid(
    d: int, points: int | None = None, gamma_levels: list[float] | None = None
) -> list[tuple[int, int, Frequency]]:
    """Unit-hemisphere samples as (level index, angle index, ζ).

    d = 1 has two points per level, τ = ±√(1−γ²). At γ = 1 every direction
    collapses to a single point.
    """
    points = settings.GRID_POINTS if points is None else points
    levels = settings.GAMMA_LEVELS if gamma_levels is None else gamma_levels
    out = []
    for i, g in enumerate(levels):
        if g >= 1.0:
            out.append((i, 0, Frequency(0.0, 1.0, (0.0,) * (d - 1))))
            continue
        if d == 1:
            angles = [(0.0, 0.0), (np.pi, 0.0)]
        elif d == 2:
            angles = [(2 * np.pi * k / points, 0.0) for k in range(points)]
        else:
            half = max(2, points // 4)
            angles = [
                (np.pi * (a + 0.5) / half, 2 * np.pi * b / half)
                for a in range(half)
                for b in range(half)
            ]
        for k, (phi, psi) in enumerate(angles):
            out.append((i, k, hemisphere_point(g, phi, d, psi)))
    return out


def angle_of(zeta: Frequency) -> float:
    if not zeta.eta:
        return 0.0 if zeta.tau >= 0 else np.pi
    return float(np.arctan2(zeta.eta[0], zeta.tau))


def small_ball_samples(
    d: int, count: int, radius: float, rng: np.random.Generator
) -> list[Frequency]:
    """Random ζ with γ ≥ 0 and 0 < ρ ≤ radius."""
    out = []
    while len(out) < count:
        v = rng.normal(size=d + 1)
        v[0] = abs(v[0])
        v /= np.linalg.norm(v)
        r = radius * rng.uniform(0.05, 1.0)
        out.append(Frequency(r * v[1], r * v[0], tuple(r * v[2:])))
    return out
