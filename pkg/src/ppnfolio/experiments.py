"""Desk-scale trend experiments: train on a synthetic market, then score a held-out range.

Two protocols:

* the turnover sweep trains on the drift market (one asset gaining 1% per
  period, the rest flat) across turnover weights and across a high cost rate;
* the risk sweep trains on a balanced two-point market, whose log-optimal
  exposure is interior, across risk weights.

Seeds are paired across grid values: a given seed fixes the initial weights,
the batch schedule and the dropout masks, so grid values differ only through
the reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cost_model import CostSpec
from .metrics import MetricBlock, compute_metrics
from .ppn import PpnConfig
from .reward import RewardConfig
from .synthetic import binary_market, drift_market
from .training import TrainConfig, evaluate, train

GRID = (1e-4, 1e-3, 1e-2, 1e-1)
SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class Protocol:
    market: str
    train_range: tuple
    test_range: tuple
    steps: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    psi: float = 0.0025
    lam: float = 1e-4
    gamma: float = 1e-3
    k: int = 30

    def panel(self):
        if self.market == "drift":
            return drift_market(m=3, n=400)
        if self.market == "binary":
            return binary_market(m=1, n=1001, up=1.1, down=0.915, block=50, seed=0)
        raise ValueError(f"unknown market {self.market!r}")


TURNOVER = Protocol(market="drift", train_range=(0, 300), test_range=(300, 400), steps=300)
RISK = Protocol(market="binary", train_range=(0, 801), test_range=(801, 1001), steps=600,
                learning_rate=1e-4)


def run_cell(protocol: Protocol, seed: int, lam: float | None = None, gamma: float | None = None,
             psi: float | None = None, panel=None) -> MetricBlock:
    panel = protocol.panel() if panel is None else panel
    psi = protocol.psi if psi is None else psi
    reward = RewardConfig(lam=protocol.lam if lam is None else lam,
                          gamma=protocol.gamma if gamma is None else gamma)
    cfg = TrainConfig(batch_size=protocol.batch_size, learning_rate=protocol.learning_rate,
                      steps=protocol.steps, seed=seed, psi=psi)
    result = train(panel, PpnConfig(m=panel.m, k=protocol.k), reward, cfg, train_range=protocol.train_range)
    ledger = evaluate(result.params, panel, CostSpec.uniform(psi), *protocol.test_range)
    return compute_metrics(ledger)


@dataclass
class SweepResult:
    name: str
    grid: tuple
    seeds: tuple
    values: np.ndarray  # (len(seeds), len(grid))
    blocks: list = field(default_factory=list)

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)


def sweep(protocol: Protocol, vary: str, metric: str, grid=GRID, seeds=SEEDS) -> SweepResult:
    """Train one policy per (seed, grid value) and record ``metric`` on the test range."""
    panel = protocol.panel()
    values = np.empty((len(seeds), len(grid)))
    blocks = []
    for i, seed in enumerate(seeds):
        for j, v in enumerate(grid):
            block = run_cell(protocol, seed, panel=panel, **{vary: v})
            values[i, j] = getattr(block, metric)
            blocks.append(block)
    return SweepResult(f"{metric} vs {vary}", tuple(grid), tuple(seeds), values, blocks)


@dataclass
class TrendVerdict:
    passed: bool
    increases: list  # (index, amount) for every adjacent pair that goes up
    detail: str


def nonincreasing_with_one_tie(values, tie: float, relative: bool = False) -> TrendVerdict:
    """Nonincreasing sequence, tolerating one adjacent increase no larger than ``tie``.

    With ``relative=True`` the allowance for pair ``(i, i+1)`` is ``tie * values[i]``.
    """
    v = np.asarray(values, dtype=np.float64)
    ups = [(i, float(v[i + 1] - v[i])) for i in range(v.size - 1) if v[i + 1] > v[i]]
    allowance = [tie * abs(v[i]) if relative else tie for i, _ in ups]
    small = [u for u, a in zip(ups, allowance) if u[1] <= a]
    passed = len(ups) == len(small) and len(small) <= 1
    detail = " > ".join(f"{x:.6g}" for x in v)
    if ups:
        detail += " | increases at " + ", ".join(f"{i}->{i + 1} (+{d:.3g})" for i, d in ups)
    return TrendVerdict(passed, ups, detail)
