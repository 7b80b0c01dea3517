"""Anticor: shift wealth from recent winners to recent losers when their
lagged cross-correlation suggests the losers will catch up."""

from __future__ import annotations

import numpy as np

from ..cost_model import drift_portfolio
from .base import OnlineStrategy
from .simplex import uniform_risky


def anticor_claims(log_x: np.ndarray, window: int) -> np.ndarray:
    """Claim matrix ``claim[i, j]`` (wealth moving from i to j) over the last two windows.

    ``log_x`` holds log-relatives oldest first with at least ``2 * window`` rows.
    """
    w = window
    lx1 = log_x[-2 * w:-w]
    lx2 = log_x[-w:]
    mu1, mu2 = lx1.mean(axis=0), lx2.mean(axis=0)
    sd1, sd2 = lx1.std(axis=0, ddof=1), lx2.std(axis=0, ddof=1)
    cov = (lx1 - mu1).T @ (lx2 - mu2) / (w - 1)
    denom = np.outer(sd1, sd2)
    corr = np.divide(cov, denom, out=np.zeros_like(cov), where=denom > 0)
    self_neg = np.maximum(-np.diag(corr), 0.0)
    claim = corr + self_neg[:, None] + self_neg[None, :]
    active = (mu2[:, None] > mu2[None, :]) & (corr > 0)
    return np.where(active, claim, 0.0)


def anticor_step(b_drifted: np.ndarray, claims: np.ndarray) -> np.ndarray:
    totals = claims.sum(axis=1)
    share = np.divide(claims, totals[:, None], out=np.zeros_like(claims), where=totals[:, None] > 0)
    transfer = b_drifted[:, None] * share
    out = b_drifted + transfer.sum(axis=0) - transfer.sum(axis=1)
    out = np.maximum(out, 0.0)
    return out / out.sum()


class Anticor(OnlineStrategy):
    """Holds uniform over risky assets until ``2 * window`` relatives have been seen."""

    name = "Anticor"

    def __init__(self, window: int = 30):
        if window < 2:
            raise ValueError("Anticor window must be at least 2")
        super().__init__(window=window)
        self.window = int(window)

    def update(self, b, history, ctx):
        if len(history) < 2 * self.window:
            return uniform_risky(self.m)
        b_drifted = drift_portfolio(b, history[-1])
        return anticor_step(b_drifted, anticor_claims(np.log(history), self.window))
