"""Boundary-layer expansions for the small-viscosity Neumann problem.

Linear constant-coefficient problems go through filtering: v = A_d⁻¹(∂_t + ΣA_j∂_j)u₀
solves a dissipative hyperbolic problem, then u₀ is recovered slice by slice in t.
Quasilinear totally incoming problems in one space dimension go through the
cascade boundary ODE → Dirichlet problem → linearised higher orders.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from app.analysis.fields import DiscreteField, Grid
from app.analysis.linalg import SpectralSplit, decaying_exponential_apply, is_symmetric, spectral_split
from app.analysis.lopatinski import Case, ReducedBC, reduce
from app.analysis.newton import colored_jacobian, damped_newton
from app.analysis.stencils import apply_nodes, node_blocks, second_difference, upwind
from app.core.errors import (
    AdNotPositive,
    CharacteristicBoundary,
    DimensionMismatch,
    NonCommutingLayer,
    NonSymmetric,
    SolvabilityResidualLarge,
    TraceNotInStableSubspace,
)
from app.models.hp_model import HyperbolicParabolicModel

logger = logging.getLogger("app.analysis.expansion")


# --- characteristic transport ---------------------------------------------


def advect_characteristic(
    grid: Grid,
    speeds: np.ndarray,
    forcing: np.ndarray,
    inflow: np.ndarray,
    coupling: np.ndarray | None = None,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Crank–Nicolson solve of ∂_t w + C w + Λ∂_x w = g with Λ = diag(speeds).

    Components with positive speed take ``inflow`` (nt, N) at x = 0; the others
    enter at x = X with zero data. Returns w with shape (nt, nx, N).
    """
    nx, nt, dt = grid.nx, grid.nt, grid.dt
    n = speeds.size
    dtype = complex if np.iscomplexobj(forcing) or coupling is not None and np.iscomplexobj(coupling) else float

    blocks = []
    boundary = np.zeros(nx * n, dtype=bool)
    for k, lam in enumerate(speeds):
        d = upwind(nx, grid.dx, positive=lam > 0)
        sel = np.zeros((n, n))
        sel[k, k] = lam
        blocks.append(node_blocks(d, sel))
        boundary[(0 if lam > 0 else nx - 1) * n + k] = True
    k_op = sum(blocks[1:], blocks[0]).tocsr()
    if coupling is not None:
        k_op = k_op + sp.kron(sp.eye(nx), sp.csr_matrix(coupling))

    eye = sp.eye(nx * n, format="csr")
    keep = sp.diags((~boundary).astype(float))
    pin = sp.diags(boundary.astype(float))
    left = (keep @ (eye / dt + 0.5 * k_op) + pin).tocsc()
    right = (keep @ (eye / dt - 0.5 * k_op)).tocsr()
    lu = splu(left)

    w = np.zeros((nt, nx, n), dtype=dtype)
    if initial is not None:
        w[0] = initial
    inflow_idx = np.flatnonzero(boundary[:n])
    g = forcing.reshape(nt, nx * n)
    for step in range(nt - 1):
        rhs = right @ w[step].ravel() + 0.5 * (~boundary) * (g[step] + g[step + 1])
        level = np.zeros((nx, n), dtype=dtype)
        level[0, inflow_idx] = inflow[step + 1, inflow_idx]
        rhs = np.where(boundary, level.ravel(), rhs)
        w[step + 1] = lu.solve(rhs).reshape(nx, n)
    return w


# --- filtered outer solve -------------------------------------------------


@dataclass
class OuterSolution:
    v: DiscreteField
    u0: DiscreteField
    residual_l2: float
    residual_sup: float


def _tangential(model: HyperbolicParabolicModel, mode: float) -> np.ndarray:
    if model.d == 1:
        return np.zeros((model.N, model.N))
    if model.d > 2:
        raise DimensionMismatch("filtered solves are implemented for d ≤ 2")
    return 1j * mode * model.A(1)


def _check_outer_model(model: HyperbolicParabolicModel) -> tuple[np.ndarray, np.ndarray]:
    if not all(is_symmetric(model.A(j)) for j in range(model.d + 1)):
        raise NonSymmetric(f"{model.name}: the filtered solve needs symmetric A_j")
    lam, r = np.linalg.eigh(model.Ad)
    if np.min(np.abs(lam)) <= 1e-10 * max(1.0, np.abs(lam).max()):
        raise CharacteristicBoundary(f"{model.name}: A_d has a zero eigenvalue")
    if not model.is_constant:
        logger.debug("%s: freezing coefficients at the base state", model.name)
    return lam, r


def solve_filtered_outer(
    model: HyperbolicParabolicModel,
    f: DiscreteField,
) -> OuterSolution:
    """Outer solution u₀ of (∂_t + ΣA_j∂_j)u₀ = f with a decaying layer available at x = 0.

    The boundary rule π₊v|₀ = π₊A_d⁻¹f|₀ leaves ∂_x u₀|₀ in 𝔼₋(A_d).
    """
    lam, r = _check_outer_model(model)
    grid = f.grid
    ad = model.Ad
    ad_inv = np.linalg.inv(ad)
    tang = _tangential(model, f.mode)
    complex_mode = model.d == 2 and f.mode != 0.0

    a_inv_f = np.einsum("ij,tnj->tni", ad_inv, f.values)
    g = np.gradient(a_inv_f, grid.dt, axis=0, edge_order=2) + np.einsum("ij,tnj->tni", tang, a_inv_f)
    g_w = np.einsum("ji,tnj->tni", r, g)
    inflow = a_inv_f[:, 0, :] @ r
    coupling = r.T @ tang @ r if complex_mode else None
    w = advect_characteristic(grid, lam, g_w, inflow, coupling)
    v = np.einsum("ij,tnj->tni", r, w)

    # recover u₀ from ∂_t u₀ + (tangential) u₀ = A_d v, trapezoidal in t
    dtype = complex if complex_mode or np.iscomplexobj(v) else float
    u0 = np.zeros(v.shape, dtype=dtype)
    eye = np.eye(model.N)
    lhs = np.linalg.inv(eye + 0.5 * grid.dt * tang)
    rhs_m = eye - 0.5 * grid.dt * tang
    av = np.einsum("ij,tnj->tni", ad, v)
    for n in range(grid.nt - 1):
        step = u0[n] @ rhs_m.T + 0.5 * grid.dt * (av[n] + av[n + 1])
        u0[n + 1] = step @ lhs.T
    if not complex_mode:
        u0 = u0.real if np.iscomplexobj(u0) else u0
        v = v.real if np.iscomplexobj(v) else v

    v_field = DiscreteField(grid, v, f.mode, "v")
    u0_field = DiscreteField(grid, u0, f.mode, "u0")
    res = _linear_residual(model, u0_field, f)
    logger.info(
        "filtered outer solve %s on %dx%d: |Lu0 - f|_2 = %.3e", model.name, grid.nt, grid.nx, res.l2_norm()
    )
    return OuterSolution(v_field, u0_field, res.l2_norm(), res.sup_norm())


def _linear_residual(model: HyperbolicParabolicModel, u: DiscreteField, f: DiscreteField) -> DiscreteField:
    tang = _tangential(model, u.mode)
    lu = (
        u.dt_field().values
        + np.einsum("ij,tnj->tni", tang, u.values)
        + np.einsum("ij,tnj->tni", model.Ad, u.dx_field().values)
    )
    return DiscreteField(u.grid, lu - f.values, u.mode, "residual")


def laplacian(u: DiscreteField) -> DiscreteField:
    """∂_x² − k² on a single tangential mode."""
    out = u.dxx_field()
    if u.mode:
        out = out - (u.mode**2) * u
    return DiscreteField(u.grid, out.values, u.mode, f"Δ{u.name}")


# --- layer profiles -------------------------------------------------------


@dataclass
class LayerProfile:
    """u*(t, z) = e^{zA_d}(amplitude(t) + z·slope(t)) with both coefficients in 𝔼₋(A_d)."""

    t: np.ndarray
    amplitude: np.ndarray
    slope: np.ndarray
    decay_matrix: np.ndarray
    split: SpectralSplit
    order: int = 1

    @classmethod
    def zero(cls, t: np.ndarray, model: HyperbolicParabolicModel, order: int = 1) -> "LayerProfile":
        z = np.zeros((t.size, model.N))
        return cls(t, z, z.copy(), model.Ad, spectral_split(model.Ad), order)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.amplitude) or np.any(self.slope))

    @property
    def decay_rate(self) -> float:
        return self.split.gap_width

    def __call__(self, z: float) -> np.ndarray:
        coeffs = (self.amplitude + z * self.slope).T
        return decaying_exponential_apply(self.decay_matrix, self.split, z, coeffs).T

    def z_derivative_at_boundary(self) -> np.ndarray:
        return self.amplitude @ self.decay_matrix.T + self.slope

    def decay_holds(self, z_values=None) -> bool:
        """‖u*(z)‖ ≤ (‖a‖ + 2‖b‖/(e·gap))·e^{−gap·z/2} for the sampled z."""
        gap = self.decay_rate
        if not np.isfinite(gap) or self.is_zero:
            return True
        z_values = np.linspace(0.0, 40.0 / gap, 81) if z_values is None else z_values
        a = np.abs(self.amplitude).max()
        b = np.abs(self.slope).max()
        n = self.amplitude.shape[1]
        bound = np.sqrt(n) * (a + 2 * b / (np.e * gap))
        for z in z_values:
            val = float(np.abs(self(z)).max())
            if val > bound * np.exp(-gap * z / 2) * (1 + 1e-9) + 1e-14:
                return False
        return True

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "decayRate": self.decay_rate if np.isfinite(self.decay_rate) else None,
            "maxAmplitude": float(np.abs(self.amplitude).max()) if self.amplitude.size else 0.0,
            "maxSlope": float(np.abs(self.slope).max()) if self.slope.size else 0.0,
        }


def _trace_tolerance(u0: DiscreteField) -> float:
    delta = max(u0.grid.dx, u0.grid.dt)
    return 10 * delta**2 * max(1.0, u0.sup_norm()) + 1e-8


def layer_profile_first_order(model: HyperbolicParabolicModel, u0: DiscreteField) -> LayerProfile:
    """u₁*(t, z) = −e^{zA_d}A_d⁻¹∂_x u₀(t, 0)."""
    split = spectral_split(model.Ad)
    trace = u0.normal_trace()
    off = np.abs(trace @ split.pi_plus.T).max()
    tol = _trace_tolerance(u0)
    if off > tol:
        raise TraceNotInStableSubspace(f"|π₊ ∂_x u₀(·,0)| = {off:.3e} exceeds {tol:.3e}")
    amp = -(trace @ np.linalg.inv(model.Ad).T) @ split.pi_minus.T
    if not np.iscomplexobj(trace):
        amp = amp.real
    return LayerProfile(u0.t, amp, np.zeros_like(amp), model.Ad, split, order=1)


@dataclass
class NextOrder:
    u1bar: OuterSolution
    u2star: LayerProfile
    residual_l2: float


def next_order_terms(
    model: HyperbolicParabolicModel, u0: DiscreteField, u1star: LayerProfile
) -> NextOrder:
    """ū₁ from Lū₁ = Δu₀ and the decaying u₂* of A_d∂_z u₂* − ∂_z²u₂* = −L′u₁*.

    With L′ = ∂_t + ikA₁ and u₁* = e^{zA_d}c, the layer term is
    u₂* = e^{zA_d}(z·A_d⁻¹L′c + q), and ∂_x ū₁|₀ + ∂_z u₂*|₀ = 0 fixes q.
    """
    ad = model.Ad
    ad_inv = np.linalg.inv(ad)
    tang = _tangential(model, u0.mode)
    if np.linalg.norm(tang @ ad - ad @ tang) > 1e-12 * max(1.0, np.linalg.norm(tang)) and not u1star.is_zero:
        raise NonCommutingLayer("closed-form u₂* needs A₁ to commute with A_d when the layer is present")
    split = u1star.split

    c = u1star.amplitude
    lc = np.gradient(c, u0.grid.dt, axis=0, edge_order=2) + c @ tang.T if c.size else c
    slope = lc @ ad_inv.T
    if not np.iscomplexobj(c) and not np.iscomplexobj(tang):
        slope = slope.real

    # ∂_z(z e^{zA}b)|₀ = b
    bar = solve_filtered_outer(model, DiscreteField(u0.grid, laplacian(u0).values, u0.mode, "Δu0"))
    trace = bar.u0.normal_trace()
    q = -((trace + slope) @ ad_inv.T) @ split.pi_minus.T
    if not np.iscomplexobj(trace) and not np.iscomplexobj(slope):
        q = q.real
    u2 = LayerProfile(u0.t, q, slope @ split.pi_minus.T if np.any(slope) else slope, ad, split, order=2)
    return NextOrder(bar, u2, bar.residual_l2)


# --- order-zero mixed reduction -------------------------------------------


@dataclass
class LayerAmplitude:
    amplitude: np.ndarray
    residual: float


@dataclass
class MixedReduction:
    model: HyperbolicParabolicModel
    reduced: ReducedBC
    tol: float = 1e-8

    @property
    def case(self) -> Case:
        return self.reduced.classification.case

    def outer_dirichlet(self) -> tuple[np.ndarray, np.ndarray]:
        """Case (ii): Γ₁ū₀ = g₁ is inherited unchanged; the reduced Neumann rows Γ̃₂."""
        return self.model.gamma1, self.reduced.gamma_tilde2

    def _lstsq(self, m: np.ndarray, rhs: np.ndarray, basis: np.ndarray, check: bool) -> LayerAmplitude:
        if m.size == 0:
            coeff = np.zeros(basis.shape[1])
        else:
            coeff = np.linalg.lstsq(m, rhs, rcond=None)[0]
        residual = float(np.linalg.norm(m @ coeff - rhs)) if m.size else float(np.linalg.norm(rhs))
        if check and residual > self.tol * max(1.0, float(np.linalg.norm(rhs))):
            raise SolvabilityResidualLarge(f"layer solvability residual {residual:.3e}")
        return LayerAmplitude(basis @ coeff, residual)

    def layer_amplitude(self, g2: np.ndarray, normal_trace: np.ndarray, check: bool = True) -> LayerAmplitude:
        """Case (ii): a = ∂_z u₁*|₀ ∈ 𝔼₋(A_d) with Γ₂(∂_x ū₀|₀ + a) = g₂."""
        e_minus = spectral_split(self.model.Ad).stable_basis
        g2 = np.atleast_1d(np.asarray(g2, dtype=complex))
        rhs = g2 - self.model.gamma2 @ np.asarray(normal_trace, dtype=complex)
        return self._lstsq(self.model.gamma2 @ e_minus, rhs, e_minus, check)

    def layer_value(self, g1: np.ndarray, outer_trace: np.ndarray, check: bool = True) -> LayerAmplitude:
        """Case (i): u₀*(0) ∈ X with Γ₁(ū₀(0) + u₀*(0)) = g₁."""
        if self.reduced.X is None:
            raise DimensionMismatch("layer_value applies to case (i) reductions")
        x = self.reduced.X
        g1 = np.atleast_1d(np.asarray(g1, dtype=complex))
        rhs = g1 - self.model.gamma1 @ np.asarray(outer_trace, dtype=complex)
        return self._lstsq(self.model.gamma1 @ x, rhs, x, check)


def order_zero_mixed_reduction(model: HyperbolicParabolicModel, reduced: ReducedBC | None = None) -> MixedReduction:
    return MixedReduction(model, reduce(model) if reduced is None else reduced)


# --- quasilinear totally incoming cascade ---------------------------------


@dataclass
class ExpansionProfile:
    """u^a_M = Σ_{j<M} ε^j u_j; ``order`` is the number M of retained profiles."""

    order: int
    outer: list[DiscreteField]
    layers: list[LayerProfile]
    traces: list[float]
    newton_iterations: int = 0
    meta: dict = field(default_factory=dict)

    def composite(self, epsilon: float, order: int | None = None) -> DiscreteField:
        m = self.order if order is None else order
        out = self.outer[0] * 1.0
        for j in range(1, m):
            out = out + (epsilon**j) * self.outer[j]
        out.name = f"u^a_{m}"
        return out


@dataclass
class _Operators:
    D: sp.csr_matrix
    D2: sp.csr_matrix
    lo: np.ndarray
    hi: np.ndarray


def _operators(grid: Grid) -> _Operators:
    d = upwind(grid.nx, grid.dx, positive=True)
    d2 = second_difference(grid.nx, grid.dx)
    j = np.arange(grid.nx - 1)
    return _Operators(d, d2, np.maximum(j - 2, 0), j)


def _transport(model: HyperbolicParabolicModel, ops: _Operators, u: np.ndarray) -> np.ndarray:
    """A(u)·Du node by node, u of shape (nx, N); zero at x = 0."""
    a = model.A_field(1, u)
    return np.einsum("nij,nj->ni", a, ops.D @ u)


def _check_positive(model: HyperbolicParabolicModel, u: np.ndarray, t: float):
    eigs = np.linalg.eigvals(model.A_field(1, u))
    low = float(eigs.real.min())
    if low <= 0:
        raise AdNotPositive(f"A(u) lost positivity at t = {t:.4g} (min eigenvalue {low:.3e})")


def composite_residual(
    model: HyperbolicParabolicModel, u: DiscreteField, f: DiscreteField, epsilon: float
) -> float:
    """Discrete L² norm of ℰ(u) − f at half steps on nodes x > 0, same stencils as the cascade."""
    ops = _operators(u.grid)
    dt = u.grid.dt
    total = 0.0
    prev_n = _transport(model, ops, u.values[0])
    prev_d2 = ops.D2 @ u.values[0]
    for n in range(u.grid.nt - 1):
        nxt_n = _transport(model, ops, u.values[n + 1])
        nxt_d2 = ops.D2 @ u.values[n + 1]
        e = (
            (u.values[n + 1] - u.values[n]) / dt
            + 0.5 * (nxt_n + prev_n)
            - 0.5 * epsilon * (nxt_d2 + prev_d2)
            - 0.5 * (f.values[n] + f.values[n + 1])
        )
        total += float(np.sum(np.abs(e[1:]) ** 2))
        prev_n, prev_d2 = nxt_n, nxt_d2
    return float(np.sqrt(total * dt * u.grid.dx))


def _boundary_ode(rhs: np.ndarray, dt: float) -> np.ndarray:
    """∂_t b = rhs(t) by the trapezoidal rule, b(0) = 0."""
    out = np.zeros_like(rhs)
    out[1:] = np.cumsum(0.5 * dt * (rhs[1:] + rhs[:-1]), axis=0)
    return out


def _order_zero(model, ops, f: DiscreteField) -> tuple[np.ndarray, int]:
    grid = f.grid
    n = model.N
    dt = grid.dt
    u = np.zeros((grid.nt, grid.nx, n))
    u[:, 0] = _boundary_ode(f.values[:, 0], dt)
    iterations = 0
    prev = _transport(model, ops, u[0])
    for step in range(grid.nt - 1):
        known = u[step]
        boundary = u[step + 1, 0]
        forcing = 0.5 * (f.values[step] + f.values[step + 1])

        def residual(x, known=known, boundary=boundary, forcing=forcing, prev=prev):
            full = np.vstack([boundary[None, :], x.reshape(-1, n)])
            r = (full - known) / dt + 0.5 * (_transport(model, ops, full) + prev) - forcing
            return r[1:].ravel()

        def jacobian(x, r):
            return colored_jacobian(residual, x, n, ops.lo, ops.hi, f0=r)

        x, its = damped_newton(residual, known[1:].ravel(), jacobian, scale=dt)
        iterations += its
        u[step + 1, 1:] = x.reshape(-1, n)
        _check_positive(model, u[step + 1], grid.t[step + 1])
        prev = _transport(model, ops, u[step + 1])
    return u, iterations


def _linearised_blocks(model, ops, u0_level: np.ndarray) -> np.ndarray:
    """B(u₀) with B w = d_uA(u₀)[w]·Du₀, shape (nx, N, N)."""
    n = model.N
    du0 = ops.D @ u0_level
    out = np.zeros((u0_level.shape[0], n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        out[:, :, k] = np.einsum("nij,nj->ni", model.dA(1, u0_level, np.broadcast_to(e, u0_level.shape)), du0)
    return out


def _linear_order(model, ops, u0: np.ndarray, forcing: np.ndarray, grid: Grid) -> np.ndarray:
    """CN solve of ∂_t w + A(u₀)Dw + B(u₀)w = F, node 0 from ∂_t w(t, 0) = F(t, 0)."""
    n = model.N
    nx, dt = grid.nx, grid.dt
    w = np.zeros_like(forcing)
    w[:, 0] = _boundary_ode(forcing[:, 0], dt)
    interior = slice(n, nx * n)

    def operator(level):
        a = model.A_field(1, u0[level])
        op = node_blocks(ops.D, a) + sp.block_diag(list(_linearised_blocks(model, ops, u0[level])))
        return op.tocsr()

    prev_op = operator(0)
    eye = sp.eye(nx * n, format="csr")
    for step in range(grid.nt - 1):
        op = operator(step + 1)
        lhs = (eye / dt + 0.5 * op)[interior, :]
        rhs = (w[step].ravel() / dt - 0.5 * (prev_op @ w[step].ravel()) + 0.5 * (forcing[step] + forcing[step + 1]).ravel())
        b = w[step + 1, 0]
        rhs_i = rhs[interior] - lhs[:, :n] @ b
        x = splu(lhs[:, n:].tocsc()).solve(rhs_i)
        w[step + 1, 1:] = x.reshape(-1, n)
        prev_op = op
    return w


def _order_forcing(model, ops, outer: list[np.ndarray], j: int) -> np.ndarray:
    d2 = apply_nodes(ops.D2, outer[j - 1])
    if j == 1:
        return d2
    if j == 2:
        u0, u1 = outer[0], outer[1]
        out = np.empty_like(u1)
        for n in range(u0.shape[0]):
            du0 = ops.D @ u0[n]
            du1 = ops.D @ u1[n]
            first = np.einsum("nij,nj->ni", model.dA(1, u0[n], u1[n]), du1)
            second = np.einsum("nij,nj->ni", model.d2A(1, u0[n], u1[n]), du0)
            out[n] = d2[n] - first - 0.5 * second
        return out
    raise DimensionMismatch("the cascade keeps at most three profiles")


def quasilinear_incoming_expansion(
    model: HyperbolicParabolicModel, f: DiscreteField, M: int = 1
) -> ExpansionProfile:
    """Profiles u₀ … u_{M−1} of the totally incoming cascade in one space dimension."""
    if model.d != 1:
        raise DimensionMismatch("the quasilinear cascade runs in one space dimension")
    if not 1 <= M <= 3:
        raise DimensionMismatch("M must be 1, 2 or 3")
    _check_positive(model, np.asarray(model.base_state, dtype=float)[None, :], 0.0)
    grid = f.grid
    ops = _operators(grid)

    u0, iterations = _order_zero(model, ops, f)
    outer = [u0]
    for j in range(1, M):
        forcing = _order_forcing(model, ops, outer, j)
        outer.append(_linear_order(model, ops, u0, forcing, grid))

    fields = [DiscreteField(grid, u, 0.0, f"u{j}") for j, u in enumerate(outer)]
    traces = [float(np.abs(fl.normal_trace()).max()) for fl in fields]
    layers = [LayerProfile.zero(grid.t, model, order=j + 1) for j in range(M)]
    logger.info(
        "quasilinear cascade %s M=%d on %dx%d: Newton iterations %d, traces %s",
        model.name, M, grid.nt, grid.nx, iterations, ", ".join(f"{t:.2e}" for t in traces),
    )
    return ExpansionProfile(M, fields, layers, traces, iterations)
