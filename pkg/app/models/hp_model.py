import logging
from dataclasses import dataclass, field

import numpy as np

from app.analysis.linalg import eigen_clusters, multiplicity_pattern, numerical_rank
from app.core.errors import InvariantViolation, SingularAd
from app.models.expr import Expression
from app.schemas.model_file import ModelFile

logger = logging.getLogger("app.models")

FIRST_STEP = 1e-6
SECOND_STEP = 1e-4
SYMMETRY_TOL = 1e-12
HYPERBOLIC_TOL = 1e-8
SPHERE_SAMPLES = 32


@dataclass(eq=False)
class HyperbolicParabolicModel:
    """∂_t u + Σ A_j(u) ∂_j u = ε Δu on x_d > 0 with Γ₁u = 0, Γ₂∂_d u = 0.

    ``matrices[0]`` is the ∂_t coefficient, ``matrices[d]`` the normal one.
    Entries are floats or :class:`Expression` objects in ``u1 .. uN``.
    """

    name: str
    d: int
    N: int
    matrices: list[list[list[float | Expression]]]
    gamma1: np.ndarray
    gamma2: np.ndarray
    base_state: np.ndarray
    symmetric: bool = False
    declared_incoming: bool | None = None
    params: dict[str, float] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gamma1 = np.asarray(self.gamma1, dtype=float).reshape(-1, self.N)
        self.gamma2 = np.asarray(self.gamma2, dtype=float).reshape(-1, self.N)
        self.base_state = np.asarray(self.base_state, dtype=float)
        self._const = []
        self._exprs = []
        for m in self.matrices:
            const = np.zeros((self.N, self.N))
            exprs = []
            for r, row in enumerate(m):
                for c, entry in enumerate(row):
                    if isinstance(entry, Expression):
                        if entry.depends_on_state:
                            exprs.append((r, c, entry))
                        else:
                            const[r, c] = float(entry(self.base_state))
                    else:
                        const[r, c] = float(entry)
            self._const.append(const)
            self._exprs.append(exprs)
        self._frozen = [self.A_field(j, self.base_state) for j in range(self.d + 1)]

    # --- evaluation -------------------------------------------------------

    @property
    def is_constant(self) -> bool:
        return not any(self._exprs)

    def A_field(self, j: int, u) -> np.ndarray:
        """A_j evaluated on states of shape (..., N); returns (..., N, N)."""
        u = np.asarray(u, dtype=float)
        out = np.broadcast_to(self._const[j], u.shape[:-1] + (self.N, self.N)).copy()
        if self._exprs[j]:
            components = np.moveaxis(u, -1, 0)
            for r, c, expr in self._exprs[j]:
                out[..., r, c] = expr(components)
        return out

    def A(self, j: int) -> np.ndarray:
        """A_j frozen at the base state."""
        return self._frozen[j]

    @property
    def Ad(self) -> np.ndarray:
        return self._frozen[self.d]

    @property
    def tangential(self) -> list[np.ndarray]:
        return self._frozen[1 : self.d]

    def Ad_inv(self) -> np.ndarray:
        try:
            return np.linalg.inv(self.Ad)
        except np.linalg.LinAlgError as exc:
            raise SingularAd("A_d is singular at the base state") from exc

    def dA(self, j: int, u, w) -> np.ndarray:
        """Directional derivative d_u A_j(u)·w by central differences."""
        u = np.asarray(u, dtype=float)
        if not self._exprs[j]:
            return np.zeros(u.shape[:-1] + (self.N, self.N))
        w = np.asarray(w, dtype=float)
        h = FIRST_STEP * (1.0 + np.abs(u).max())
        return (self.A_field(j, u + h * w) - self.A_field(j, u - h * w)) / (2 * h)

    def d2A(self, j: int, u, w) -> np.ndarray:
        """Second directional derivative d²_u A_j(u)(w, w)."""
        u = np.asarray(u, dtype=float)
        if not self._exprs[j]:
            return np.zeros(u.shape[:-1] + (self.N, self.N))
        w = np.asarray(w, dtype=float)
        h = SECOND_STEP * (1.0 + np.abs(u).max())
        return (
            self.A_field(j, u + h * w) - 2 * self.A_field(j, u) + self.A_field(j, u - h * w)
        ) / (h * h)

    # --- derived counts ---------------------------------------------------

    @property
    def n_dirichlet(self) -> int:
        return numerical_rank(self.gamma1) if self.gamma1.size else 0

    @property
    def n_neumann(self) -> int:
        return numerical_rank(self.gamma2) if self.gamma2.size else 0

    @property
    def ad_eigenvalues(self) -> np.ndarray:
        return np.sort(np.linalg.eigvals(self.Ad).real)

    @property
    def totally_incoming(self) -> bool:
        return bool(np.all(self.ad_eigenvalues > HYPERBOLIC_TOL * max(1.0, np.abs(self.Ad).max())))

    def symbol_at(self, xi) -> np.ndarray:
        """Σ ξ_j A_j over the spatial directions."""
        xi = np.asarray(xi, dtype=float)
        return sum(x * self._frozen[j + 1] for j, x in enumerate(xi))

    # --- validation -------------------------------------------------------

    def validate(self) -> dict:
        eye = np.eye(self.N)
        if np.linalg.norm(self.A(0) - eye) > SYMMETRY_TOL * self.N:
            raise InvariantViolation("A0_identity", "A0 must equal the identity at the base state")

        s = np.linalg.svd(self.Ad, compute_uv=False)
        if s[-1] <= 1e-12 * max(1.0, s[0]):
            raise InvariantViolation("Ad_invertible", "the boundary is characteristic at the base state")

        r1, r2 = self.n_dirichlet, self.n_neumann
        stack = np.vstack([self.gamma1, self.gamma2])
        r12 = numerical_rank(stack) if stack.size else 0
        if not (r1 + r2 == r12 == self.N):
            raise InvariantViolation(
                "rank_condition",
                f"rank Γ1 + rank Γ2 = {r1} + {r2}, rank of the stack = {r12}, N = {self.N}",
            )

        if self.symmetric:
            for j, a in enumerate(self._frozen):
                if np.linalg.norm(a - a.T) > SYMMETRY_TOL * max(1.0, np.linalg.norm(a)):
                    raise InvariantViolation("symmetric", f"A{j} is not symmetric")

        patterns = set()
        for xi in _sphere(self.d):
            m = self.symbol_at(xi)
            clusters = eigen_clusters(m, radius=1e-6)
            if any(abs(c.center.imag) > HYPERBOLIC_TOL * max(1.0, np.abs(m).max()) for c in clusters):
                raise InvariantViolation("hyperbolic", f"complex characteristic speeds at ξ = {xi.tolist()}")
            if not all(c.semisimple for c in clusters):
                raise InvariantViolation("semisimple", f"Jordan block in Σ ξ_j A_j at ξ = {xi.tolist()}")
            patterns.add(multiplicity_pattern(clusters))

        incoming = self.totally_incoming
        if self.declared_incoming is not None and self.declared_incoming != incoming:
            raise InvariantViolation(
                "totally_incoming", f"declared {self.declared_incoming}, computed {incoming}"
            )

        constant = len(patterns) == 1
        if not constant:
            logger.warning(
                "model %s: characteristic multiplicities vary over the ξ-sphere: %s",
                self.name,
                sorted(patterns),
            )
        self.diagnostics = {
            "totallyIncoming": incoming,
            "constantMultiplicity": constant,
            "multiplicityPatterns": [list(p) for p in sorted(patterns)],
        }
        return self.diagnostics

    # --- serialization ----------------------------------------------------

    def to_model_file(self) -> ModelFile:
        def entry(e):
            return e.text if isinstance(e, Expression) else float(e)

        return ModelFile(
            name=self.name,
            d=self.d,
            N=self.N,
            matrices=[[[entry(e) for e in row] for row in m] for m in self.matrices],
            gamma1=self.gamma1.tolist(),
            gamma2=self.gamma2.tolist(),
            baseState=self.base_state.tolist(),
            flags={"symmetric": self.symmetric, "totallyIncoming": self.declared_incoming},
            params=dict(self.params),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, HyperbolicParabolicModel):
            return NotImplemented
        return self.to_model_file() == other.to_model_file()

    __hash__ = None


def _sphere(d: int) -> list[np.ndarray]:
    if d == 1:
        return [np.array([1.0]), np.array([-1.0])]
    if d == 2:
        phi = np.linspace(0.0, 2 * np.pi, SPHERE_SAMPLES, endpoint=False)
        return [np.array([np.cos(p), np.sin(p)]) for p in phi]
    # golden-spiral points on S²
    k = np.arange(SPHERE_SAMPLES) + 0.5
    z = 1 - 2 * k / SPHERE_SAMPLES
    r = np.sqrt(1 - z * z)
    phi = np.pi * (1 + 5**0.5) * k
    return [np.array([r[i] * np.cos(phi[i]), r[i] * np.sin(phi[i]), z[i]]) for i in range(len(k))]


def build_model(spec: ModelFile) -> HyperbolicParabolicModel:
    """Parse every entry of a model file; validation is a separate step."""
    params = dict(spec.params)
    matrices = []
    for m in spec.matrices:
        rows = []
        for row in m:
            out_row = []
            for e in row:
                if isinstance(e, str):
                    out_row.append(Expression.parse(e, n_vars=spec.N, params=params))
                else:
                    out_row.append(float(e))
            rows.append(out_row)
        matrices.append(rows)
    return HyperbolicParabolicModel(
        name=spec.name,
        d=spec.d,
        N=spec.N,
        matrices=matrices,
        gamma1=spec.gamma1 or np.zeros((0, spec.N)),
        gamma2=spec.gamma2 or np.zeros((0, spec.N)),
        base_state=spec.baseState,
        symmetric=spec.flags.symmetric,
        declared_incoming=spec.flags.totallyIncoming,
        params=params,
    )
