"""Finite-difference solvers for the viscous problem and the exact low-frequency resolvent ODE."""

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from app.analysis.expansion import advect_characteristic, quasilinear_incoming_expansion
from app.analysis.fields import DiscreteField, Grid
from app.analysis.frequency import Frequency
from app.analysis.newton import colored_jacobian, damped_newton
from app.analysis.symbols import block_diagonalize
from app.core.errors import (
    CFLBlowup,
    DimensionMismatch,
    GlancingOrCharacteristic,
    NonlinearSolveDiverged,
    SupportReachedOutflow,
)
from app.models.hp_model import HyperbolicParabolicModel
from app.models.loader import load_builtin

logger = logging.getLogger("app.analysis.solvers")

SUPPORT_CELLS = 5
SUPPORT_TOL = 1e-8


class Scheme(str, enum.Enum):
    BACKWARD_EULER_UPWIND = "BackwardEulerUpwind"
    CRANK_NICOLSON_CENTERED = "CrankNicolsonCentered"


@dataclass
class ViscousRun:
    model: HyperbolicParabolicModel
    epsilon: float
    grid: Grid
    scheme: Scheme
    solution: DiscreteField
    newton_iterations: int = 0

    def as_dict(self) -> dict:
        return {
            "model": self.model.name,
            "epsilon": self.epsilon,
            "grid": self.grid.as_dict(),
            "scheme": self.scheme.value,
            "supNorm": self.solution.sup_norm(),
            "newtonIterations": self.newton_iterations,
        }


# --- viscous operator -----------------------------------------------------


@dataclass
class _ViscousOps:
    Dx: sp.csr_matrix
    Dm: sp.csr_matrix
    Dp: sp.csr_matrix
    Dxx: sp.csr_matrix
    transform: sp.csr_matrix
    algebraic: sp.csr_matrix
    alg_rows: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def _boundary_split(model: HyperbolicParabolicModel):
    p = np.vstack([model.gamma1, model.gamma2]).astype(float)
    if p.shape != (model.N, model.N) or abs(np.linalg.det(p)) < 1e-12:
        raise DimensionMismatch("stack(Γ₁, Γ₂) must be square and invertible for the viscous solver")
    p_inv = np.linalg.inv(p)
    nd = model.gamma1.shape[0]
    return p, p_inv[:, :nd], p_inv[:, nd:], nd


def _viscous_ops(model: HyperbolicParabolicModel, grid: Grid) -> _ViscousOps:
    """Node-major operators; node 0 carries the mixed conditions in w = stack(Γ₁, Γ₂)u."""
    n, nx, h = model.N, grid.nx, grid.dx
    eye = np.eye(n)
    p, pinv_d, pinv_n, nd = _boundary_split(model)
    g1, g2 = model.gamma1, model.gamma2

    def interior(offsets_coeffs, skip_first=True):
        rows, cols, vals = [], [], []
        for i in range(1 if skip_first else 0, nx - 1):
            for off, c in offsets_coeffs:
                rows.append(i)
                cols.append(i + off)
                vals.append(c)
        s = sp.csr_matrix((vals, (rows, cols)), shape=(nx, nx))
        return sp.kron(s, sp.csr_matrix(eye)).tolil()

    dx = interior([(-1, -0.5 / h), (1, 0.5 / h)])
    dm = interior([(-1, -1 / h), (0, 1 / h)])
    dp = interior([(0, -1 / h), (1, 1 / h)])
    dxx = interior([(-1, 1 / h**2), (0, -2 / h**2), (1, 1 / h**2)])

    # node 0: ∂_x w_N = 0, one-sided stencils for w_D
    first = pinv_d @ g1 if nd else np.zeros((n, n))
    for node, c in enumerate([-1.5 / h, 2 / h, -0.5 / h]):
        blk = c * first
        for m in (dx, dm, dp):
            m[0:n, node * n : (node + 1) * n] = blk
    second = {0: 2 * first / h**2, 1: -5 * first / h**2, 2: 4 * first / h**2, 3: -first / h**2}
    reflect = pinv_n @ g2
    second[0] = second[0] - 2 * reflect / h**2
    second[1] = second[1] + 2 * reflect / h**2
    for node, blk in second.items():
        dxx[0:n, node * n : (node + 1) * n] = blk

    transform = sp.lil_matrix(sp.eye(nx * n))
    transform[0:n, 0:n] = p
    algebraic = sp.lil_matrix((nx * n, nx * n))
    if nd:
        algebraic[0:nd, 0:n] = g1
    last = nx - 1
    for off, c in [(0, 1.0), (-1, -3.0), (-2, 3.0), (-3, -1.0)]:
        algebraic[last * n : (last + 1) * n, (last + off) * n : (last + off + 1) * n] = c * eye
    alg_rows = np.concatenate([np.arange(nd), np.arange(last * n, (last + 1) * n)])

    j = np.arange(nx)
    lo = np.where(j == 0, 0, np.where(j == last, last - 3, j - 1))
    hi = np.where(j == 0, 3, np.where(j == last, last, j + 1))
    return _ViscousOps(
        dx.tocsr(), dm.tocsr(), dp.tocsr(), dxx.tocsr(),
        transform.tocsr(), algebraic.tocsr(), alg_rows, lo, hi,
    )


def _split_speeds(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """A = A⁺ + A⁻ node by node from the eigen-decomposition."""
    lam, r = np.linalg.eig(a)
    r_inv = np.linalg.inv(r)
    plus = np.einsum("...ij,...j,...jk->...ik", r, np.maximum(lam.real, 0), r_inv).real
    return plus, a - plus


def _advection(model, ops: _ViscousOps, scheme: Scheme, u: np.ndarray) -> np.ndarray:
    n = model.N
    a = model.A_field(1, u.reshape(-1, n))
    if scheme is Scheme.CRANK_NICOLSON_CENTERED:
        return np.einsum("nij,nj->ni", a, (ops.Dx @ u).reshape(-1, n)).ravel()
    plus, minus = _split_speeds(a)
    return (
        np.einsum("nij,nj->ni", plus, (ops.Dm @ u).reshape(-1, n))
        + np.einsum("nij,nj->ni", minus, (ops.Dp @ u).reshape(-1, n))
    ).ravel()


def _linear_operator(model, ops: _ViscousOps, scheme: Scheme, nx: int) -> sp.csr_matrix:
    a = model.A(1)
    if scheme is Scheme.CRANK_NICOLSON_CENTERED:
        return sp.kron(sp.eye(nx), sp.csr_matrix(a)) @ ops.Dx
    plus, minus = _split_speeds(a)
    return sp.kron(sp.eye(nx), sp.csr_matrix(plus)) @ ops.Dm + sp.kron(sp.eye(nx), sp.csr_matrix(minus)) @ ops.Dp


def _check_support(model, u: np.ndarray, t: float):
    if np.all(model.ad_eigenvalues > 0):
        return
    peak = float(np.abs(u).max())
    edge = float(np.abs(u[-SUPPORT_CELLS:]).max())
    if peak > 0 and edge > SUPPORT_TOL * peak:
        raise SupportReachedOutflow(f"solution reached x = X at t = {t:.4g} ({edge:.3e} vs {peak:.3e})")


def viscous_solve_1d(
    model: HyperbolicParabolicModel,
    epsilon: float,
    f: DiscreteField,
    scheme: Scheme = Scheme.CRANK_NICOLSON_CENTERED,
    initial: np.ndarray | None = None,
) -> ViscousRun:
    """∂_t u + A(u)∂_x u − ε∂_x²u = f on (0, X), Γ₁u = 0 and Γ₂∂_x u = 0 at x = 0."""
    if model.d != 1:
        raise DimensionMismatch("viscous solves run in one space dimension")
    grid = f.grid
    if not grid.resolves(epsilon):
        raise DimensionMismatch(f"Δx = {grid.dx:.3e} does not resolve the layer of width ε = {epsilon}")
    n, nx, dt = model.N, grid.nx, grid.dt
    ops = _viscous_ops(model, grid)
    theta = 0.5 if scheme is Scheme.CRANK_NICOLSON_CENTERED else 1.0
    size = nx * n
    dynamic = np.ones(size, dtype=bool)
    dynamic[ops.alg_rows] = False
    keep = sp.diags(dynamic.astype(float))
    eye = sp.eye(size, format="csr")
    fv = f.values.reshape(grid.nt, size)

    u = np.zeros((grid.nt, size))
    if initial is not None:
        u[0] = np.asarray(initial, dtype=float).ravel()
    scale = 1e8 * (1.0 + np.abs(f.values).max() * grid.T + np.abs(u[0]).max())
    iterations = 0

    if model.is_constant:
        k_op = _linear_operator(model, ops, scheme, nx) - epsilon * ops.Dxx
        left = (keep @ ops.transform @ (eye / dt + theta * k_op) + ops.algebraic).tocsc()
        right = (keep @ ops.transform @ (eye / dt - (1 - theta) * k_op)).tocsr()
        lu = splu(left)
        for step in range(grid.nt - 1):
            forcing = ops.transform @ (theta * fv[step + 1] + (1 - theta) * fv[step])
            u[step + 1] = lu.solve(right @ u[step] + dynamic * forcing)
            if not np.all(np.isfinite(u[step + 1])) or np.abs(u[step + 1]).max() > scale:
                raise CFLBlowup(f"values exploded at t = {grid.t[step + 1]:.4g}")
            _check_support(model, u[step + 1].reshape(nx, n), grid.t[step + 1])
    else:
        def spatial(x):
            return _advection(model, ops, scheme, x) - epsilon * (ops.Dxx @ x)

        prev = spatial(u[0])
        for step in range(grid.nt - 1):
            old = u[step]
            forcing = theta * fv[step + 1] + (1 - theta) * fv[step]

            def residual(x, old=old, prev=prev, forcing=forcing):
                dyn = (x - old) / dt + theta * spatial(x) + (1 - theta) * prev - forcing
                return dynamic * (ops.transform @ dyn) + ops.algebraic @ x

            def jacobian(x, r):
                return colored_jacobian(residual, x, n, ops.lo, ops.hi, f0=r)

            try:
                x, its = damped_newton(residual, old, jacobian, scale=dt)
            except NonlinearSolveDiverged as exc:
                raise CFLBlowup(f"Newton failed at t = {grid.t[step + 1]:.4g}: {exc}") from exc
            iterations += its
            if np.abs(x).max() > scale:
                raise CFLBlowup(f"values exploded at t = {grid.t[step + 1]:.4g}")
            u[step + 1] = x
            prev = spatial(x)
            _check_support(model, x.reshape(nx, n), grid.t[step + 1])

    solution = DiscreteField(grid, u.reshape(grid.nt, nx, n), 0.0, f"u_eps={epsilon:g}")
    logger.info(
        "viscous solve %s eps=%g %s on %dx%d: sup %.4e, Newton iterations %d",
        model.name, epsilon, scheme.value, grid.nt, nx, solution.sup_norm(), iterations,
    )
    return ViscousRun(model, epsilon, grid, scheme, solution, iterations)


# --- Fornet transmission problem ------------------------------------------


def gaussian_bump(x: np.ndarray, center: float = 1.5, width: float = 0.3) -> np.ndarray:
    return np.exp(-(((x - center) / width) ** 2))


@dataclass
class FornetRun:
    viscous: ViscousRun
    limit: DiscreteField
    l2_difference: float


def fornet_limit(
    model: HyperbolicParabolicModel, f: DiscreteField, initial: np.ndarray
) -> DiscreteField:
    """Limit problem through the boundary trace: (Γ₁; Γ₂A⁻¹)∂_t w = (0; Γ₂A⁻¹f(t, 0)),
    then a totally incoming Dirichlet problem with data w."""
    grid = f.grid
    a_inv = np.linalg.inv(model.Ad)
    lhs = np.vstack([model.gamma1, model.gamma2 @ a_inv])
    rhs = np.hstack([np.zeros((grid.nt, model.gamma1.shape[0])), f.values[:, 0] @ (model.gamma2 @ a_inv).T])
    increments = np.zeros_like(rhs)
    increments[1:] = np.cumsum(0.5 * grid.dt * (rhs[1:] + rhs[:-1]), axis=0)
    trace = initial[0] + increments @ np.linalg.inv(lhs).T

    lam, r = np.linalg.eigh(model.Ad)
    w = advect_characteristic(
        grid,
        lam,
        np.einsum("ji,tnj->tni", r, f.values),
        trace @ r,
        initial=initial @ r,
    )
    return DiscreteField(grid, np.einsum("ij,tnj->tni", r, w), 0.0, "v0")


def fornet_solve(
    alpha: float,
    beta: float,
    epsilon: float,
    grid: Grid,
    f: DiscreteField | None = None,
    initial: np.ndarray | None = None,
    scheme: Scheme = Scheme.CRANK_NICOLSON_CENTERED,
) -> FornetRun:
    """Viscous solution v^ε of the 2×2 transmission-type problem and its limit v⁰."""
    model = load_builtin("fornet", alpha=alpha, beta=beta)
    if f is None:
        f = DiscreteField.zeros(grid, 2, name="f")
    if initial is None:
        bump = gaussian_bump(grid.x)
        initial = np.stack([bump, bump], axis=-1)
    viscous = viscous_solve_1d(model, epsilon, f, scheme, initial)
    limit = fornet_limit(model, f, initial)
    diff = (viscous.solution - limit).l2_norm()
    logger.info("fornet eps=%g: |v_eps - v0|_2 = %.4e", epsilon, diff)
    return FornetRun(viscous, limit, diff)


def hyperbolic_solve_incoming(model: HyperbolicParabolicModel, f: DiscreteField) -> DiscreteField:
    """Order-zero outer solution of the totally incoming Neumann problem."""
    return quasilinear_incoming_expansion(model, f, M=1).outer[0]


# --- weighted estimate ----------------------------------------------------


def weighted_ratios(u: DiscreteField, f: DiscreteField, gammas=(2.0, 4.0, 8.0, 16.0)) -> dict[float, float]:
    """|u|_γ / (γ⁻¹|f|_γ + γ⁻²|∂_x f|_γ) for each γ."""
    fx = f.dx_field()
    out = {}
    for g in gammas:
        denom = f.weighted_norm(g) / g + fx.weighted_norm(g) / g**2
        out[float(g)] = u.weighted_norm(g) / denom if denom > 0 else 0.0
    return out


# --- resolvent ODE --------------------------------------------------------


@dataclass(frozen=True)
class ExponentialProfile:
    """Σ_k c_k e^{−κ_k x} on x ≥ 0, rates κ_k > 0."""

    rates: tuple[float, ...]
    coefficients: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "ExponentialProfile":
        return cls((), np.zeros((0, n), dtype=complex))

    @classmethod
    def single(cls, rate: float, coefficient) -> "ExponentialProfile":
        return cls((float(rate),), np.atleast_2d(np.asarray(coefficient, dtype=complex)))

    def __post_init__(self):
        if any(k <= 0 for k in self.rates):
            raise ValueError("exponential rates must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.asarray(self.rates)
        return np.exp(-np.outer(x, k)) @ self.coefficients

    def gram(self) -> np.ndarray:
        k = np.asarray(self.rates)
        return 1.0 / (k[:, None] + k[None, :])

    def l2_squared(self) -> float:
        if not self.rates:
            return 0.0
        c = self.coefficients
        return float(np.real(np.einsum("ki,kl,li->", c.conj(), self.gram(), c)))


@dataclass
class ResolventSolve:
    zeta: Frequency
    H: np.ndarray
    P: np.ndarray
    b: np.ndarray
    particular_H: ExponentialProfile
    particular_P: ExponentialProfile
    forcing_H: ExponentialProfile
    forcing_P: ExponentialProfile
    g: np.ndarray
    norm_H: float
    norm_P: float
    trace_H: float
    trace_P: float

    def u_H(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        hom = np.stack([sla.expm(xi * self.H) @ self.b for xi in x])
        return hom + self.particular_H(x)

    def u_P(self, x) -> np.ndarray:
        return self.particular_P(x)

    def estimate_ratio(self) -> float:
        """Left side over right side of the low-frequency resolvent estimate."""
        w = self.zeta.gamma + self.zeta.rho**2
        lhs = w**3 * self.norm_H**2 + self.norm_P**2 + w**2 * self.trace_H**2 + self.trace_P**2
        rhs = self.forcing_P.l2_squared() + w * self.forcing_H.l2_squared() + float(np.linalg.norm(self.g) ** 2)
        return lhs / rhs if rhs > 0 else 0.0


def _particular(block: np.ndarray, forcing: ExponentialProfile) -> ExponentialProfile:
    n = block.shape[0]
    coeffs = [
        -np.linalg.solve(block + k * np.eye(n), c) for k, c in zip(forcing.rates, forcing.coefficients)
    ]
    return ExponentialProfile(forcing.rates, np.array(coeffs).reshape(len(coeffs), n))


def resolvent_ode_solve(
    model: HyperbolicParabolicModel,
    zeta: Frequency,
    forcing_H: ExponentialProfile,
    forcing_P: ExponentialProfile,
    g,
) -> ResolventSolve:
    """Decaying solution of ∂_x U = diag(H, P)U + F with H u_H(0) + u_P(0) = g."""
    bd = block_diagonalize(model, zeta)
    h, p = bd.H, bd.P
    n = model.N
    if np.linalg.eigvals(h).real.max() >= 0:
        raise GlancingOrCharacteristic(f"H has a non-decaying mode at {zeta}")

    part_p = _particular(p, forcing_P)
    part_h = _particular(h, forcing_H)
    up0 = part_p.coefficients.sum(axis=0) if part_p.rates else np.zeros(n, dtype=complex)
    g = np.asarray(g, dtype=complex)
    uh0 = np.linalg.solve(h, g - up0)
    b = uh0 - (part_h.coefficients.sum(axis=0) if part_h.rates else 0)

    # |e^{Hx}b + Σ a_k e^{−κ_k x}|² integrated in closed form
    hh = h.conj().T
    lyap = sla.solve_continuous_lyapunov(hh, -np.eye(n))
    norm_h = float(np.real(b.conj() @ lyap @ b))
    for k, a in zip(part_h.rates, part_h.coefficients):
        norm_h += 2 * float(np.real(b.conj() @ (-np.linalg.solve(hh - k * np.eye(n), a))))
    norm_h += part_h.l2_squared()

    return ResolventSolve(
        zeta, h, p, b, part_h, part_p, forcing_H, forcing_P, g,
        float(np.sqrt(max(norm_h, 0.0))),
        float(np.sqrt(part_p.l2_squared())),
        float(np.linalg.norm(uh0)),
        float(np.linalg.norm(up0)),
    )


def canonical_data(n: int, rate: float = 1.0):
    """Unit forcings e_k·e^{−x} in each block and unit boundary data, one at a time."""
    zero = ExponentialProfile.zero(n)
    eye = np.eye(n, dtype=complex)
    for k in range(n):
        yield ExponentialProfile.single(rate, eye[k]), zero, np.zeros(n, dtype=complex)
        yield zero, ExponentialProfile.single(rate, eye[k]), np.zeros(n, dtype=complex)
        yield zero, zero, eye[k]


def resolvent_estimate_constant(model: HyperbolicParabolicModel, zetas: list[Frequency]) -> tuple[float, Frequency | None]:
    """Largest estimate ratio over the sampled frequencies and the canonical data."""
    best, where = 0.0, None
    for z in zetas:
        for fh, fp, g in canonical_data(model.N):
            ratio = resolvent_ode_solve(model, z, fh, fp, g).estimate_ratio()
            if ratio > best:
                best, where = ratio, z
    return best, where
