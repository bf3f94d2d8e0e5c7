"""Sparse difference operators on a uniform grid 0 = x_0 < ... < x_{n-1} = X."""

import numpy as np
import scipy.sparse as sp


def upwind(nx: int, dx: float, positive: bool = True) -> sp.csr_matrix:
    """∂_x by second-order upwind differences with a first-order closure next to the inflow node.

    The inflow row (0 for positive speed, nx−1 otherwise) is left empty.
    """
    rows, cols, vals = [], [], []
    if positive:
        rows += [1, 1]
        cols += [1, 0]
        vals += [1 / dx, -1 / dx]
        i = np.arange(2, nx)
        rows += [*i, *i, *i]
        cols += [*i, *(i - 1), *(i - 2)]
        vals += [*np.full(i.size, 1.5 / dx), *np.full(i.size, -2 / dx), *np.full(i.size, 0.5 / dx)]
    else:
        last = nx - 2
        rows += [last, last]
        cols += [last, last + 1]
        vals += [-1 / dx, 1 / dx]
        i = np.arange(0, nx - 2)
        rows += [*i, *i, *i]
        cols += [*i, *(i + 1), *(i + 2)]
        vals += [*np.full(i.size, -1.5 / dx), *np.full(i.size, 2 / dx), *np.full(i.size, -0.5 / dx)]
    return sp.csr_matrix((vals, (rows, cols)), shape=(nx, nx))


def centered(nx: int, dx: float) -> sp.csr_matrix:
    """Central ∂_x on interior nodes; rows 0 and nx−1 empty."""
    i = np.arange(1, nx - 1)
    rows = [*i, *i]
    cols = [*(i + 1), *(i - 1)]
    vals = [*np.full(i.size, 0.5 / dx), *np.full(i.size, -0.5 / dx)]
    return sp.csr_matrix((vals, (rows, cols)), shape=(nx, nx))


def second_difference(nx: int, dx: float) -> sp.csr_matrix:
    """∂_x² with ghost reflection u_{−1} = u_1 at x = 0 and a one-sided closure at x = X."""
    h2 = dx * dx
    i = np.arange(1, nx - 1)
    rows = [0, 0, *i, *i, *i, nx - 1, nx - 1, nx - 1, nx - 1]
    cols = [0, 1, *(i - 1), *i, *(i + 1), nx - 1, nx - 2, nx - 3, nx - 4]
    vals = [
        -2 / h2, 2 / h2,
        *np.full(i.size, 1 / h2), *np.full(i.size, -2 / h2), *np.full(i.size, 1 / h2),
        2 / h2, -5 / h2, 4 / h2, -1 / h2,
    ]
    return sp.csr_matrix((vals, (rows, cols)), shape=(nx, nx))


def node_blocks(stencil: sp.spmatrix, blocks: np.ndarray) -> sp.csr_matrix:
    """Operator acting as blocks[i] @ (Σ_j stencil[i, j] u_j) on node-major vectors.

    ``blocks`` has shape (nx, N, N); a single (N, N) block is broadcast.
    """
    s = sp.coo_matrix(stencil)
    blocks = np.asarray(blocks)
    n = blocks.shape[-1]
    if blocks.ndim == 2:
        blocks = np.broadcast_to(blocks, (s.shape[0], n, n))
    data = s.data[:, None, None] * blocks[s.row]
    r = (s.row[:, None, None] * n + np.arange(n)[None, :, None]) + np.zeros((1, 1, n), dtype=int)
    c = (s.col[:, None, None] * n + np.arange(n)[None, None, :]) + np.zeros((1, n, 1), dtype=int)
    return sp.csr_matrix(
        (data.ravel(), (r.ravel(), c.ravel())), shape=(s.shape[0] * n, s.shape[1] * n)
    )


def apply_nodes(stencil: sp.spmatrix, u: np.ndarray) -> np.ndarray:
    """Apply a scalar stencil to every component of u with shape (nx, N) or (nt, nx, N)."""
    if u.ndim == 2:
        return stencil @ u
    return np.stack([stencil @ level for level in u])
