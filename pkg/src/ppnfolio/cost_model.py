"""Proportional transaction costs for one rebalancing step.

Rebalancing from the drifted holdings ``a_hat`` to the target ``a_new`` costs
a fraction ``c`` of gross wealth, leaving ``omega = 1 - c``. Cash (index 0)
clears every trade and is never charged itself, so with sales
``s_i = (a_hat_i - a_new_i * omega)^+`` and purchases
``b_i = (a_new_i * omega - a_hat_i)^+`` over risky assets,

    1 - omega = psi_s * sum(s) + psi_p * sum(b).

The right side is piecewise linear in ``omega`` with slope at most ``psi_s``,
so ``1 - omega - rhs`` is strictly decreasing and the root is unique. It lies
in ``[1 - (psi_p + psi_s)/(1 + psi_p), 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

SIMPLEX_ATOL = 1e-9


@dataclass(frozen=True)
class CostSpec:
    psi_p: float = 0.0025
    psi_s: float = 0.0025

    def __post_init__(self):
        for rate in (self.psi_p, self.psi_s):
            if not 0.0 <= rate < 1.0:
                raise ContractError(f"cost rates must lie in [0, 1); got {rate}")

    @classmethod
    def uniform(cls, psi: float) -> "CostSpec":
        return cls(psi_p=psi, psi_s=psi)

    @property
    def psi(self) -> float:
        if self.psi_p != self.psi_s:
            raise ContractError("psi is only defined when purchase and sale rates match")
        return self.psi_p

    @property
    def max_cost(self) -> float:
        return (self.psi_p + self.psi_s) / (1.0 + self.psi_p)


@dataclass(frozen=True)
class RebalanceResult:
    omega: float
    cost: float
    sales: np.ndarray
    purchases: np.ndarray


def check_simplex(w, name: str = "portfolio", atol: float = SIMPLEX_ATOL) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim < 1 or w.shape[-1] < 1:
        raise ContractError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(w)) or np.any(w < -atol) or np.any(np.abs(w.sum(axis=-1) - 1.0) > atol):
        raise ContractError(f"{name} is not on the simplex: {w}")
    return w


def drift_portfolio(a_prev, x) -> np.ndarray:
    """Holdings after the market moves: ``(a * x) / (a . x)``."""
    a_prev = np.asarray(a_prev, dtype=np.float64)
    grown = a_prev * np.asarray(x, dtype=np.float64)
    return grown / grown.sum(axis=-1, keepdims=True)


def _balance_rhs(a_hat, a_new, omega, psi_p, psi_s):
    # risky assets only; omega broadcasts over the leading axes
    diff = a_hat[..., 1:] - a_new[..., 1:] * omega[..., None]
    sales = np.maximum(diff, 0.0).sum(axis=-1)
    buys = np.maximum(-diff, 0.0).sum(axis=-1)
    return psi_s * sales + psi_p * buys


def solve_omega(a_hat, a_new, spec: CostSpec, method: str = "bisection",
                tol: float = 1e-14, max_iter: int = 200) -> np.ndarray:
    """Net-wealth proportion for one or many rebalances (vectorized over leading axes).

    ``method='bisection'`` brackets the root in ``[1 - max_cost, 1]``;
    ``method='fixed_point'`` iterates ``omega <- 1 - rhs(omega)``, a contraction
    with modulus ``max(psi_p, psi_s)``.
    """
    a_hat = np.asarray(a_hat, dtype=np.float64)
    a_new = np.asarray(a_new, dtype=np.float64)
    psi_p, psi_s = spec.psi_p, spec.psi_s
    shape = a_hat.shape[:-1]
    if method == "bisection":
        lo = np.full(shape, 1.0 - spec.max_cost)
        hi = np.ones(shape)
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            f = 1.0 - mid - _balance_rhs(a_hat, a_new, mid, psi_p, psi_s)
            pos = f > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
            if np.all(hi - lo <= tol):
                break
        omega = 0.5 * (lo + hi)
        # snap exact no-trade cases
        exact = _balance_rhs(a_hat, a_new, np.ones(shape), psi_p, psi_s) == 0.0
        return np.where(exact, 1.0, omega)
    if method == "fixed_point":
        omega = np.ones(shape)
        for _ in range(max_iter):
            nxt = 1.0 - _balance_rhs(a_hat, a_new, omega, psi_p, psi_s)
            if np.all(np.abs(nxt - omega) <= tol):
                return nxt
            omega = nxt
        return omega
    raise ValueError(f"unknown method {method!r}")


def solve_rebalance(a_hat, a_new, spec: CostSpec, method: str = "bisection") -> RebalanceResult:
    a_hat = check_simplex(a_hat, "drifted portfolio")
    a_new = check_simplex(a_new, "target portfolio")
    if a_hat.shape != a_new.shape or a_hat.ndim != 1:
        raise ContractError(f"portfolio shapes differ: {a_hat.shape} vs {a_new.shape}")
    omega = float(solve_omega(a_hat, a_new, spec, method=method))
    diff = a_hat - a_new * omega
    sales = np.maximum(diff, 0.0)
    purchases = np.maximum(-diff, 0.0)
    sales[0] = purchases[0] = 0.0
    return RebalanceResult(omega=omega, cost=1.0 - omega, sales=sales, purchases=purchases)


def risky_l1(a_new, a_hat) -> np.ndarray:
    """``||a_new - a_hat||_1`` over risky assets, the norm the cost bracket is stated in."""
    return np.abs(np.asarray(a_new)[..., 1:] - np.asarray(a_hat)[..., 1:]).sum(axis=-1)


@dataclass
class BoundReport:
    passed: bool
    cost: float
    lower: float
    upper: float
    ceiling: float
    l1: float
    l1_full: float
    l1_range_claim_ok: bool
    message: str = ""


def check_cost_bounds(a_hat, a_new, spec: CostSpec, result: RebalanceResult,
                       rtol: float = 1e-12) -> BoundReport:
    """Check ``psi/(1+psi) L1 <= c <= psi/(1-psi) L1`` and ``c <= 2 psi/(1+psi)``.

    ``L1`` is taken over risky assets. ``l1_range_claim_ok`` separately records
    whether ``L1 <= 2(1-psi)/(1+psi)``; that claim fails for a full swap between
    two risky assets (``L1 = 2``), so it is reported but not enforced.
    """
    psi = spec.psi
    l1 = float(risky_l1(a_new, a_hat))
    l1_full = float(np.abs(np.asarray(a_new) - np.asarray(a_hat)).sum())
    c = result.cost
    lower = psi / (1.0 + psi) * l1
    upper = psi / (1.0 - psi) * l1
    ceiling = 2.0 * psi / (1.0 + psi)
    slack = rtol * max(1.0, abs(c))
    problems = []
    if c < lower - slack:
        problems.append(f"cost {c!r} below lower bound {lower!r}")
    if c > upper + slack:
        problems.append(f"cost {c!r} above upper bound {upper!r}")
    if c > ceiling + slack:
        problems.append(f"cost {c!r} above ceiling {ceiling!r}")
    if c < -slack:
        problems.append(f"negative cost {c!r}")
    l1_claim = c <= 0 or l1 <= 2.0 * (1.0 - psi) / (1.0 + psi) + 1e-12
    msg = "; ".join(problems)
    if problems:
        msg += f" | a_hat={np.asarray(a_hat).tolist()} a_new={np.asarray(a_new).tolist()} psi={psi}"
    return BoundReport(not problems, c, lower, upper, ceiling, l1, l1_full, bool(l1_claim), msg)


def turnover_term(a_hat, a_new, omega) -> float:
    """Half the L1 distance (all m+1 components) between drifted and post-cost holdings."""
    return 0.5 * float(np.abs(np.asarray(a_hat) - np.asarray(a_new) * omega).sum())
