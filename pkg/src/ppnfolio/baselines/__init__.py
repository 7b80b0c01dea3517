"""Classical comparison strategies behind the backtest :class:`Strategy` interface."""

from __future__ import annotations

import numpy as np

from ..backtest import Strategy, run_backtest
from ..cost_model import CostSpec
from ..market_data import PricePanel
from .anticor import Anticor, anticor_claims, anticor_step
from .benchmarks import CRP, UBAH, Best
from .follow_winner import EG, ONS, UP
from .mean_reversion import (CWMR, OLMAR, PAMR, RMR, WMAMR, cwmr_lambda, l1_median, pamr_step,
                             relative_prices, reversion_step)
from .simplex import project_simplex, project_simplex_in_norm, uniform_risky

REGISTRY = {
    "ubah": UBAH,
    "best": Best,
    "crp": CRP,
    "up": UP,
    "eg": EG,
    "anticor": Anticor,
    "ons": ONS,
    "cwmr": CWMR,
    "pamr": PAMR,
    "olmar": OLMAR,
    "rmr": RMR,
    "wmamr": WMAMR,
}

BENCHMARKS = ("ubah", "best", "crp")
FOLLOW_WINNER = ("up", "eg", "ons")
MEAN_REVERSION = ("pamr", "cwmr", "olmar", "rmr", "wmamr")


def make_strategy(name: str, **params) -> Strategy:
    try:
        cls = REGISTRY[name.lower()]
    except KeyError:
        raise KeyError(f"unknown strategy {name!r}; choose from {sorted(REGISTRY)}") from None
    return cls(**params)


def _actions(kind: str, allowed, panel: PricePanel, params: dict | None, k: int,
             start: int | None, stop: int | None) -> np.ndarray:
    if kind.lower() not in allowed:
        raise KeyError(f"{kind!r} is not one of {allowed}")
    strategy = make_strategy(kind, **(params or {}))
    ledger = run_backtest(panel, strategy, CostSpec(0.0, 0.0), k=k, start=start, stop=stop)
    return ledger.actions


def run_benchmark(kind: str, panel: PricePanel, k: int = 30, start=None, stop=None) -> np.ndarray:
    return _actions(kind, BENCHMARKS, panel, None, k, start, stop)


def run_follow_winner(kind: str, panel: PricePanel, params: dict | None = None, k: int = 30,
                      start=None, stop=None) -> np.ndarray:
    return _actions(kind, FOLLOW_WINNER, panel, params, k, start, stop)


def run_mean_reversion(kind: str, panel: PricePanel, params: dict | None = None, k: int = 30,
                       start=None, stop=None) -> np.ndarray:
    return _actions(kind, MEAN_REVERSION, panel, params, k, start, stop)


def run_anticor(panel: PricePanel, params: dict | None = None, k: int = 30,
                start=None, stop=None) -> np.ndarray:
    return _actions("anticor", ("anticor",), panel, params, k, start, stop)


__all__ = [
    "REGISTRY", "make_strategy", "run_benchmark", "run_follow_winner", "run_mean_reversion",
    "run_anticor", "project_simplex", "project_simplex_in_norm", "uniform_risky", "UBAH", "Best",
    "CRP", "UP", "EG", "ONS", "PAMR", "CWMR", "OLMAR", "RMR", "WMAMR", "Anticor", "pamr_step",
    "reversion_step", "relative_prices", "l1_median", "cwmr_lambda", "anticor_claims",
    "anticor_step",
]
