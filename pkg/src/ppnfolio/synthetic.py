"""Synthetic price panels for tests, demos and the bundled offline dataset."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .market_data import PricePanel, ingest_panel, write_asset_csv

PERIOD = 1800
EPOCH = 1_500_000_000
BUNDLED_ASSETS = ("alpha", "beta", "gamma")
BUNDLED_PERIODS = 2000
BUNDLED_SEED = 20240601


def panel_from_closes(closes, period_seconds: int = PERIOD, wick: float = 0.002,
                      names=None, start: int = EPOCH) -> PricePanel:
    """OHLC panel whose opens are the previous closes and whose wicks extend by ``wick``."""
    closes = np.asarray(closes, dtype=np.float64)
    m, n = closes.shape
    opens = np.concatenate([closes[:, :1], closes[:, :-1]], axis=1)
    high = np.maximum(opens, closes) * (1.0 + wick)
    low = np.minimum(opens, closes) * (1.0 - wick)
    ohlc = np.stack([opens, high, low, closes], axis=-1)
    names = tuple(names) if names is not None else tuple(f"asset{i + 1}" for i in range(m))
    return PricePanel(names, start + period_seconds * np.arange(n, dtype=np.int64), ohlc,
                      np.ones((m, n), dtype=bool), period_seconds)


def closes_from_relatives(rel: np.ndarray) -> np.ndarray:
    """(m, n-1) relatives to (m, n) closes starting at 1."""
    return np.concatenate([np.ones((rel.shape[0], 1)), np.cumprod(rel, axis=1)], axis=1)


def drift_market(m: int = 3, n: int = 400, drifter: int = 1, rate: float = 1.01) -> PricePanel:
    """Deterministic market: risky asset ``drifter`` (1-based) grows by ``rate`` per period,
    every other asset is flat."""
    rel = np.ones((m, n - 1))
    rel[drifter - 1] = rate
    return panel_from_closes(closes_from_relatives(rel))


def gbm_market(m: int = 2, n: int = 500, mu=0.0, sigma=0.01, seed: int = 0) -> PricePanel:
    """Independent log-normal random walks with per-period log drift ``mu`` and volatility ``sigma``."""
    rng = np.random.default_rng(seed)
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (m,))[:, None]
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (m,))[:, None]
    log_rel = mu + sigma * rng.standard_normal((m, n - 1))
    return panel_from_closes(closes_from_relatives(np.exp(log_rel)))


def cycle_market(m: int = 3, n: int = 1200, amplitude: float = 0.03, cycle: int = 16,
                 noise: float = 0.002, seed: int = 0) -> PricePanel:
    """Driftless market whose log-prices oscillate around a flat level.

    Asset ``i`` follows ``amplitude * sin(2 pi t / cycle + 2 pi i / m)`` plus a small
    mean-reverting noise term, so shifting weight between assets pays at low cost
    and does not pay when trading is expensive.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    phase = 2.0 * np.pi * np.arange(m)[:, None] / m
    wave = amplitude * np.sin(2.0 * np.pi * t[None, :] / cycle + phase)
    ou = np.zeros((m, n))
    for s in range(1, n):
        ou[:, s] = 0.9 * ou[:, s - 1] + noise * rng.standard_normal(m)
    return panel_from_closes(np.exp(wave + ou))


def binary_market(m: int = 2, n: int = 1000, up: float = 1.1, down: float = 0.915, block: int = 50,
                  seed: int = 0) -> PricePanel:
    """Independent two-point relatives whose every ``block`` periods hold exactly half ups.

    Balancing per block pins the realized up/down frequencies of any block-aligned
    range, so the log-optimal exposure of a range is known in advance rather than
    left to sampling luck.
    """
    if block % 2:
        raise ValueError("block must be even")
    rng = np.random.default_rng(seed)
    steps = n - 1
    blocks = -(-steps // block)
    rel = np.empty((m, blocks * block))
    pattern = np.repeat([up, down], block // 2)
    for i in range(m):
        for b in range(blocks):
            rel[i, b * block:(b + 1) * block] = rng.permutation(pattern)
    return panel_from_closes(closes_from_relatives(rel[:, :steps]))


def bundled_closes() -> np.ndarray:
    """Closes of the bundled dataset: random walks with short mean-reverting swings."""
    rng = np.random.default_rng(BUNDLED_SEED)
    m, n = len(BUNDLED_ASSETS), BUNDLED_PERIODS
    mu = np.array([2e-4, 0.0, -1e-4])
    sigma = np.array([0.008, 0.012, 0.010])
    walk = np.cumsum(mu[:, None] + sigma[:, None] * rng.standard_normal((m, n)), axis=1)
    swing = np.zeros((m, n))
    for s in range(1, n):
        swing[:, s] = 0.8 * swing[:, s - 1] + 0.006 * rng.standard_normal(m)
    return 100.0 * np.exp(walk - walk[:, :1] + swing)


def write_bundled(directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    panel = panel_from_closes(bundled_closes(), names=BUNDLED_ASSETS)
    paths = []
    for i, name in enumerate(BUNDLED_ASSETS):
        path = directory / f"{name}.csv"
        write_asset_csv(path, panel.timestamps, panel.ohlc[i])
        paths.append(path)
    return paths


def bundled_paths() -> list[Path]:
    base = resources.files("ppnfolio") / "data"
    return [Path(str(base / f"{name}.csv")) for name in BUNDLED_ASSETS]


def bundled_panel() -> PricePanel:
    return ingest_panel(bundled_paths())
