"""Euclidean projection onto the probability simplex."""

from __future__ import annotations

import numpy as np


def project_simplex(v) -> np.ndarray:
    """``argmin ||w - v||_2`` over ``{w >= 0, sum(w) = 1}`` by the sorted-threshold rule.

    Sort descending, find the largest ``rho`` with ``u_rho > (cumsum_rho - 1) / rho``,
    then shift every coordinate by that threshold and clip at zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("project_simplex expects a non-empty 1-d vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def uniform_risky(m: int) -> np.ndarray:
    """Equal weight on the m risky assets, nothing in cash."""
    b = np.zeros(m + 1)
    b[1:] = 1.0 / m
    return b


def project_simplex_in_norm(y, A, tol: float = 1e-12, max_iter: int = 500) -> np.ndarray:
    """``argmin (w - y)^T A (w - y)`` over the simplex by a primal active-set method.

    ``A`` must be symmetric positive definite. Each iteration solves the
    equality-constrained problem on the current free set; a blocked step adds a
    zero constraint, a negative multiplier releases one. Exact up to rounding.
    """
    y = np.asarray(y, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    d = y.size
    b = A @ y
    w = project_simplex(y)
    fixed = w <= 0.0
    w[fixed] = 0.0
    for _ in range(max_iter):
        free = np.flatnonzero(~fixed)
        nf = free.size
        kkt = np.zeros((nf + 1, nf + 1))
        kkt[:nf, :nf] = A[np.ix_(free, free)]
        kkt[:nf, nf] = 1.0
        kkt[nf, :nf] = 1.0
        rhs = np.concatenate([b[free], [1.0]])
        sol = np.linalg.solve(kkt, rhs)
        target = np.zeros(d)
        target[free] = sol[:nf]
        nu = sol[nf]
        if np.all(target[free] >= -tol):
            w = np.maximum(target, 0.0)
            mult = A @ w - b + nu
            mult[~fixed] = 0.0
            worst = int(np.argmin(mult))
            if mult[worst] >= -tol:
                return w / w.sum()
            fixed[worst] = False
            continue
        # step toward the target until the first free coordinate hits zero
        step = w[free] - target[free]
        blocking = step > 0
        ratios = np.where(blocking, w[free] / np.where(blocking, step, 1.0), np.inf)
        j = int(np.argmin(ratios))
        alpha = ratios[j]
        w = w + alpha * (target - w)
        w[free[j]] = 0.0
        fixed[free[j]] = True
        w = np.maximum(w, 0.0)
    raise RuntimeError("active-set projection did not converge")
