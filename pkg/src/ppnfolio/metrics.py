"""Evaluation metrics computed from a backtest ledger."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .backtest import BacktestLedger


@dataclass(frozen=True)
class MetricBlock:
    apv: float
    sr: float
    std: float
    cr: float
    mdd: float
    to: float
    sr_infinite: bool = False
    cr_infinite: bool = False

    @property
    def sr_pct(self) -> float:
        return 100.0 * self.sr

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("sr", "cr"):
            if math.isinf(out[key]):
                out[key] = "inf" if out[key] > 0 else "-inf"
        return out


def apv(ledger: BacktestLedger) -> float:
    return float(ledger.wealth[-1])


def sharpe(ledger_or_returns) -> tuple[float, bool]:
    """Mean over population standard deviation of the rebalanced log-returns.

    Returns ``(ratio, infinite_flag)``; zero deviation with a nonzero mean gives
    ``(+/-inf, True)`` and zero deviation with zero mean gives ``(0.0, False)``.
    """
    r = _returns(ledger_or_returns)
    if r.size < 2:
        raise ValueError("sharpe needs at least 2 periods")
    mu = float(r.mean())
    sd = float(r.std())
    if sd == 0.0:
        if mu == 0.0:
            return 0.0, False
        return math.copysign(math.inf, mu), True
    return mu / sd, False


def max_drawdown(ledger_or_wealth) -> float:
    """Largest ``(S_t - S_tau) / S_t`` over ``t < tau``, with ``S_0`` a candidate peak."""
    s = _wealth(ledger_or_wealth)
    if s.size == 0:
        raise ValueError("empty wealth path")
    peaks = np.maximum.accumulate(s)
    return float(np.max((peaks - s) / peaks))


def max_drawdown_bruteforce(wealth) -> float:
    s = np.asarray(wealth, dtype=np.float64)
    best = 0.0
    for t in range(s.size):
        for tau in range(t + 1, s.size):
            best = max(best, (s[t] - s[tau]) / s[t])
    return best


def calmar(ledger_or_wealth) -> tuple[float, bool]:
    s = _wealth(ledger_or_wealth)
    mdd = max_drawdown(s)
    if mdd == 0.0:
        return math.inf, True
    return float(s[-1]) / mdd, False


def avg_turnover(ledger: BacktestLedger) -> float:
    """Mean of ``||a_hat_{t-1} - a_t * omega_t||_1 / 2`` over executed periods."""
    if len(ledger) == 0:
        return 0.0
    diff = np.abs(ledger.drifted - ledger.actions * ledger.omegas[:, None]).sum(axis=1)
    return float(0.5 * diff.mean())


def compute_metrics(ledger: BacktestLedger) -> MetricBlock:
    sr, sr_inf = sharpe(ledger)
    cr, cr_inf = calmar(ledger)
    return MetricBlock(
        apv=apv(ledger),
        sr=sr,
        std=float(ledger.log_returns.std()),
        cr=cr,
        mdd=max_drawdown(ledger),
        to=avg_turnover(ledger),
        sr_infinite=sr_inf,
        cr_infinite=cr_inf,
    )


def _returns(x) -> np.ndarray:
    if isinstance(x, BacktestLedger):
        return np.asarray(x.log_returns)
    return np.asarray(x, dtype=np.float64)


def _wealth(x) -> np.ndarray:
    if isinstance(x, BacktestLedger):
        return np.asarray(x.wealth)
    return np.asarray(x, dtype=np.float64)
