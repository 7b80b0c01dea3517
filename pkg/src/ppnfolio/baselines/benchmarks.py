"""Passive benchmarks: buy-and-hold, best single asset in hindsight, constant rebalancing."""

from __future__ import annotations

import numpy as np

from ..backtest import DecisionContext, Strategy
from ..market_data import PricePanel
from .simplex import uniform_risky


class UBAH(Strategy):
    """Buy the risky assets in equal parts once, then let the holdings drift."""

    name = "UBAH"

    def reset(self, m: int) -> None:
        self.m = m
        self._started = False

    def decide(self, ctx: DecisionContext) -> np.ndarray:
        if not self._started:
            self._started = True
            return uniform_risky(self.m)
        return ctx.drifted


class CRP(Strategy):
    """Rebalance to a fixed portfolio every period (uniform over risky by default)."""

    name = "CRP"

    def __init__(self, weights=None):
        self.weights = None if weights is None else np.asarray(weights, dtype=np.float64)

    def reset(self, m: int) -> None:
        self._b = uniform_risky(m) if self.weights is None else self.weights.copy()

    def decide(self, ctx: DecisionContext) -> np.ndarray:
        return self._b.copy()


class Best(Strategy):
    """Hold the single risky asset with the largest cumulative relative over the run.

    Uses future prices by design. Ties go to the lowest index.
    """

    name = "Best"
    hindsight = True

    def reset(self, m: int) -> None:
        self.m = m
        self._b = None

    def prepare(self, panel: PricePanel, start: int, stop: int) -> None:
        x = panel.relatives()[start:stop, 1:]
        growth = np.log(x).sum(axis=0)
        self.choice = int(np.argmax(growth)) + 1
        self._b = np.zeros(panel.m + 1)
        self._b[self.choice] = 1.0

    def decide(self, ctx: DecisionContext) -> np.ndarray:
        if self._b is None:
            raise RuntimeError("Best needs prepare() before decide()")
        return self._b.copy()
