"""Damped Newton with a column-coloured finite-difference Jacobian for node-banded residuals."""

import logging
from collections.abc import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from app.core.config import settings
from app.core.errors import NonlinearSolveDiverged

logger = logging.getLogger("app.analysis.newton")


def colored_jacobian(
    fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    block: int,
    lo: np.ndarray,
    hi: np.ndarray,
    h: float | None = None,
    f0: np.ndarray | None = None,
) -> sp.csc_matrix:
    """Jacobian of ``fn`` when residual node j depends only on nodes lo[j]..hi[j].

    ``x`` is laid out node-major with ``block`` components per node. Columns are
    grouped by (node mod p, component) with p the widest window, so one residual
    evaluation per group recovers every entry.
    """
    n_nodes = x.size // block
    p = int((hi - lo).max()) + 1
    f0 = fn(x) if f0 is None else f0
    h = 1e-7 * (1.0 + float(np.abs(x).max())) if h is None else h

    rows_j = np.arange(n_nodes)
    rows, cols, vals = [], [], []
    for r in range(p):
        perturbed = np.arange(r, n_nodes, p)
        owner = lo + np.mod(r - lo, p)
        valid = owner <= hi
        for k in range(block):
            step = np.zeros_like(x)
            step[perturbed * block + k] = h
            df = ((fn(x + step) - f0) / h).reshape(n_nodes, block)
            j = rows_j[valid]
            for m in range(block):
                rows.append(j * block + m)
                cols.append(owner[valid] * block + k)
                vals.append(df[valid, m])
    jac = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(x.size, x.size)
    )
    return jac.tocsc()


def damped_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    jacobian: Callable[[np.ndarray, np.ndarray], sp.spmatrix],
    tol: float | None = None,
    max_iter: int | None = None,
    scale: float = 1.0,
) -> tuple[np.ndarray, int]:
    """Newton with step halving on ‖residual‖_∞; converged when the update is below tol."""
    tol = settings.NEWTON_TOL if tol is None else tol
    max_iter = settings.NEWTON_MAX_ITER if max_iter is None else max_iter
    x = x0.copy()
    r = residual(x)
    norm = float(np.abs(r).max())
    for it in range(1, max_iter + 1):
        if norm * scale <= tol:
            return x, it - 1
        jac = jacobian(x, r)
        try:
            dx = splu(jac).solve(-r)
        except RuntimeError as exc:
            raise NonlinearSolveDiverged(f"singular Newton matrix at iteration {it}") from exc
        lam = 1.0
        for _ in range(12):
            trial = x + lam * dx
            r_trial = residual(trial)
            n_trial = float(np.abs(r_trial).max())
            if np.isfinite(n_trial) and n_trial <= max(norm, 1e-300) * (1 - 1e-4 * lam) or n_trial == 0.0:
                break
            lam *= 0.5
        else:
            if not np.isfinite(n_trial) or n_trial * scale > max(norm * scale, 10 * tol):
                raise NonlinearSolveDiverged(f"no descent after step halving, |R| = {norm:.3e}")
        x, r, norm = trial, r_trial, n_trial
        step = lam * float(np.abs(dx).max())
        if step <= tol * max(1.0, float(np.abs(x).max())) or norm * scale <= tol:
            return x, it
    raise NonlinearSolveDiverged(f"Newton did not converge in {max_iter} iterations, |R| = {norm:.3e}")
