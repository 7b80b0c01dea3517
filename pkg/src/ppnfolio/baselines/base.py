"""Shared plumbing for online strategies that update from their own history."""

from __future__ import annotations

import numpy as np

from ..backtest import DecisionContext, Strategy
from .simplex import uniform_risky


class OnlineStrategy(Strategy):
    """Start at uniform over risky assets, then call :meth:`update` once per period.

    ``history`` passed to :meth:`update` holds the relatives observed since the
    strategy's first decision, oldest first, shape (len, m+1). The most recent
    row is the relative earned by the previous action.
    """

    def __init__(self, **params):
        self.params = params
        self.b: np.ndarray | None = None
        self._t0: int | None = None

    def reset(self, m: int) -> None:
        self.m = m
        self.b = self.initial(m)
        self._t0 = None
        self.setup(m)

    def initial(self, m: int) -> np.ndarray:
        return uniform_risky(m)

    def setup(self, m: int) -> None:
        """Allocate per-run state."""

    def decide(self, ctx: DecisionContext) -> np.ndarray:
        if self._t0 is None:
            self._t0 = ctx.t
            return self.b.copy()
        history = ctx.relatives[self._t0:]
        self.b = self.update(self.b, history, ctx)
        return self.b.copy()

    def update(self, b: np.ndarray, history: np.ndarray, ctx: DecisionContext) -> np.ndarray:
        raise NotImplementedError
