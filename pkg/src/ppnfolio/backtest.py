"""Sequential portfolio backtest with exact proportional costs.

Period ``t`` (``k <= t < n``): the strategy sees the window ``[t-k, t)`` and the
executed action ``a_{t-1}``; holdings drift to ``a_hat = drift(a_{t-1}, x_{t-1})``;
rebalancing to ``a_t`` costs ``c_t``; wealth becomes
``S_t = S_{t-1} * (a_t . x_t) * (1 - c_t)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cost_model import CostSpec, check_simplex, drift_portfolio, solve_omega
from .errors import ContractError
from .market_data import PricePanel, window_at


class DecisionContext:
    """What a strategy may look at when choosing ``a_t``.

    ``relatives`` holds ``x_1 .. x_{t-1}`` (rows ``1..t-1`` of the panel's
    relatives; row 0 is the all-ones placeholder). Nothing from period ``t``
    onward is reachable.
    """

    def __init__(self, panel: PricePanel, relatives: np.ndarray, t: int, k: int,
                 prev_action: np.ndarray, drifted: np.ndarray):
        self._panel = panel
        self.t = t
        self.k = k
        self.relatives = relatives[:t]
        self.prev_action = prev_action
        self.drifted = drifted

    @cached_property
    def window(self) -> np.ndarray:
        return window_at(self._panel, self.t, self.k).values

    @property
    def m(self) -> int:
        return self._panel.m


class Strategy:
    """Base class for action sources. Subclasses override :meth:`decide`."""

    name = "strategy"
    hindsight = False

    def reset(self, m: int) -> None:
        """Called once before a run with the number of risky assets."""

    def prepare(self, panel: PricePanel, start: int, stop: int) -> None:
        """Hindsight hook; only benchmarks that are allowed to peek use it."""

    def decide(self, ctx: DecisionContext) -> np.ndarray:
        raise NotImplementedError


@dataclass
class BacktestLedger:
    periods: np.ndarray
    actions: np.ndarray
    drifted: np.ndarray
    omegas: np.ndarray
    costs: np.ndarray
    gross_returns: np.ndarray
    log_returns: np.ndarray
    wealth: np.ndarray  # wealth[0] = S_0 = 1, wealth[i+1] after periods[i]
    strategy: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.periods)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "wealth", "cost", "log_return"])
        for i, t in enumerate(self.periods):
            w.writerow([int(t), repr(float(self.wealth[i + 1])), repr(float(self.costs[i])),
                        repr(float(self.log_returns[i]))])
        return buf.getvalue()


def run_backtest(panel: PricePanel, strategy: Strategy, spec: CostSpec, k: int = 30,
                 start: int | None = None, stop: int | None = None,
                 a0=None, method: str = "bisection") -> BacktestLedger:
    """Evolve the portfolio over periods ``[start, stop)`` (default ``[k, n)``).

    ``a0`` is the allocation held during period ``start - 1`` (so it drifts
    with ``x_{start-1}`` before the first rebalance); all cash unless given.
    """
    start = k if start is None else start
    stop = panel.n if stop is None else stop
    if start < k or stop > panel.n or stop <= start:
        raise ContractError(f"backtest range [{start}, {stop}) invalid for n={panel.n}, k={k}")
    m = panel.m
    relatives = panel.relatives()
    relatives.setflags(write=False)
    if a0 is None:
        a_prev = np.zeros(m + 1)
        a_prev[0] = 1.0
    else:
        a_prev = check_simplex(np.array(a0, dtype=np.float64), "initial portfolio")
    strategy.reset(m)
    if strategy.hindsight:
        strategy.prepare(panel, start, stop)

    T = stop - start
    actions = np.empty((T, m + 1))
    drifted = np.empty((T, m + 1))
    omegas = np.empty(T)
    gross = np.empty(T)
    wealth = np.empty(T + 1)
    wealth[0] = 1.0
    for i, t in enumerate(range(start, stop)):
        a_hat = drift_portfolio(a_prev, relatives[t - 1])
        ctx = DecisionContext(panel, relatives, t, k, a_prev.copy(), a_hat.copy())
        a_t = np.asarray(strategy.decide(ctx), dtype=np.float64)
        try:
            check_simplex(a_t, f"action of {strategy.name} at t={t}")
        except ContractError as exc:
            raise ContractError(f"t={t}: {exc}") from None
        if a_t.shape != (m + 1,):
            raise ContractError(f"t={t}: action has shape {a_t.shape}, expected {(m + 1,)}")
        omega = float(solve_omega(a_hat, a_t, spec, method=method))
        r = float(a_t @ relatives[t])
        actions[i], drifted[i], omegas[i], gross[i] = a_t, a_hat, omega, r
        wealth[i + 1] = wealth[i] * r * omega
        a_prev = a_t
    costs = 1.0 - omegas
    log_returns = np.log(gross) + np.log(omegas)
    return BacktestLedger(
        periods=np.arange(start, stop),
        actions=actions,
        drifted=drifted,
        omegas=omegas,
        costs=costs,
        gross_returns=gross,
        log_returns=log_returns,
        wealth=wealth,
        strategy=strategy.name,
    )


def replay_reward(ledger: BacktestLedger, lam: float, gamma: float) -> float:
    """The cost-sensitive reward evaluated on a realized ledger."""
    from .reward import RewardConfig, compute_reward

    return float(compute_reward(ledger.log_returns, ledger.actions, ledger.drifted,
                                RewardConfig(lam=lam, gamma=gamma)))


class ActionSequence(Strategy):
    """Replays a fixed list of actions, one per period."""

    name = "replay"

    def __init__(self, actions, name: str = "replay"):
        self.actions = np.asarray(actions, dtype=np.float64)
        self.name = name
        self._i = 0

    def reset(self, m: int) -> None:
        self._i = 0

    def decide(self, ctx: DecisionContext) -> np.ndarray:
        a = self.actions[self._i]
        self._i += 1
        return a


def ledger_is_consistent(ledger: BacktestLedger, rtol: float = 1e-12) -> bool:
    s = 1.0
    for i in range(len(ledger)):
        s *= ledger.gross_returns[i] * (1.0 - ledger.costs[i])
        if not math.isclose(s, ledger.wealth[i + 1], rel_tol=rtol):
            return False
    return True
