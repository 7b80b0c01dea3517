"""Loading, aligning, gap-filling and windowing OHLC price histories.

One CSV per asset with header ``timestamp,open,high,low,close`` (Unix seconds,
``.`` decimal separator). Rows may be unsorted. Assets are aligned onto a
shared regular grid; grid periods an asset does not cover are marked missing
(NaN) until :func:`fill_missing` replaces them with flat price movements.

Index 0 of every portfolio/relative vector is cash, which has no price file.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, ContractError, DataError, ParseError

logger = logging.getLogger(__name__)

HEADER = ("timestamp", "open", "high", "low", "close")
OPEN, HIGH, LOW, CLOSE = range(4)


@dataclass(frozen=True)
class TimeGrid:
    start: int
    period_seconds: int
    periods: int

    def timestamps(self) -> np.ndarray:
        return self.start + self.period_seconds * np.arange(self.periods, dtype=np.int64)


@dataclass(frozen=True)
class AssetSeries:
    """One asset's OHLC rows as parsed from its file, sorted by timestamp."""

    asset_id: str
    timestamps: np.ndarray
    ohlc: np.ndarray

    def __post_init__(self):
        if self.timestamps.ndim != 1 or self.ohlc.shape != (self.timestamps.size, 4):
            raise ContractError(f"{self.asset_id}: timestamps/ohlc shape mismatch")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ContractError(f"{self.asset_id}: timestamps must be strictly increasing")
        if np.any(self.ohlc <= 0):
            raise ContractError(f"{self.asset_id}: prices must be positive")


@dataclass(frozen=True)
class PricePanel:
    """Aligned OHLC tensor ``ohlc[asset, period, channel]`` for m risky assets.

    ``observed`` marks which cells came from a file; missing cells are NaN
    until filled. Arrays are read-only.
    """

    asset_ids: tuple
    timestamps: np.ndarray
    ohlc: np.ndarray
    observed: np.ndarray
    period_seconds: int
    provenance: tuple = field(default=())

    def __post_init__(self):
        m, n, d = self.ohlc.shape
        if d != 4 or m < 1 or n < 2:
            raise ContractError(f"panel needs m>=1 assets, n>=2 periods, 4 channels; got {self.ohlc.shape}")
        if len(self.asset_ids) != m or self.timestamps.shape != (n,) or self.observed.shape != (m, n):
            raise ContractError("panel metadata does not match the price tensor")
        for arr in (self.timestamps, self.ohlc, self.observed):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return self.ohlc.shape[0]

    @property
    def n(self) -> int:
        return self.ohlc.shape[1]

    @property
    def is_complete(self) -> bool:
        return not np.isnan(self.ohlc).any()

    @property
    def closes(self) -> np.ndarray:
        """Close prices, shape (n, m)."""
        return self.ohlc[:, :, CLOSE].T

    def relatives(self) -> np.ndarray:
        """All price-relative vectors, shape (n, m+1); row 0 is all ones."""
        closes = self.closes
        x = np.ones((self.n, self.m + 1))
        x[1:, 1:] = closes[1:] / closes[:-1]
        return x

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.timestamps).tobytes())
        h.update(np.ascontiguousarray(np.nan_to_num(self.ohlc, nan=-1.0)).tobytes())
        h.update("|".join(self.asset_ids).encode())
        return h.hexdigest()[:16]

    def slice_periods(self, start: int, stop: int) -> "PricePanel":
        return PricePanel(
            asset_ids=self.asset_ids,
            timestamps=self.timestamps[start:stop].copy(),
            ohlc=self.ohlc[:, start:stop].copy(),
            observed=self.observed[:, start:stop].copy(),
            period_seconds=self.period_seconds,
            provenance=self.provenance,
        )


@dataclass(frozen=True)
class PriceWindow:
    """Normalized (m, k, 4) price window; the last close of every asset is 1."""

    values: np.ndarray

    @property
    def k(self) -> int:
        return self.values.shape[1]


def read_asset_csv(path) -> AssetSeries:
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        if tuple(h.strip().lower() for h in header) != HEADER:
            raise ParseError(path, 1, f"expected header {','.join(HEADER)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise ParseError(path, lineno, f"expected 5 fields, got {len(row)}")
            try:
                ts = int(row[0])
                o, h, lo, c = (float(v) for v in row[1:])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if not all(np.isfinite(v) and v > 0 for v in (o, h, lo, c)):
                raise ParseError(path, lineno, "prices must be positive and finite")
            if h < max(o, c) or lo > min(o, c):
                raise ParseError(path, lineno, "high/low inconsistent with open/close")
            rows.append((ts, o, h, lo, c, lineno))
    if not rows:
        raise ParseError(path, 2, "no data rows")
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if prev[0] == cur[0]:
            raise ParseError(path, cur[5], f"duplicate timestamp {cur[0]}")
    ts = np.array([r[0] for r in rows], dtype=np.int64)
    ohlc = np.array([r[1:5] for r in rows], dtype=np.float64)
    return AssetSeries(asset_id=path.stem, timestamps=ts, ohlc=ohlc)


def write_asset_csv(path, timestamps, ohlc) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for ts, row in zip(timestamps, ohlc):
            w.writerow([int(ts)] + [repr(float(v)) for v in row])


def ingest_panel(paths: Sequence, grid: TimeGrid | Sequence[int] | None = None,
                 period_seconds: int | None = None) -> PricePanel:
    """Parse one CSV per asset and align them on a shared grid.

    ``grid`` may be a :class:`TimeGrid`, an explicit increasing sequence of
    timestamps, or None, in which case a regular grid spanning all files is
    built with ``period_seconds`` (inferred from the first file if absent).
    Rows off the grid are dropped; grid periods without a row stay missing.
    """
    if not paths:
        raise DataError("no asset files given")
    series = [read_asset_csv(p) for p in paths]
    if isinstance(grid, TimeGrid):
        stamps = grid.timestamps()
        period = grid.period_seconds
    elif grid is not None:
        stamps = np.asarray(grid, dtype=np.int64)
        period = int(np.min(np.diff(stamps))) if stamps.size > 1 else int(period_seconds or 0)
    else:
        if period_seconds is None:
            diffs = np.diff(series[0].timestamps)
            if diffs.size == 0:
                raise DataError("cannot infer the period from a single-row file")
            period_seconds = int(diffs.min())
        lo = min(int(s.timestamps[0]) for s in series)
        hi = max(int(s.timestamps[-1]) for s in series)
        stamps = np.arange(lo, hi + 1, period_seconds, dtype=np.int64)
        period = period_seconds

    m, n = len(series), stamps.size
    ohlc = np.full((m, n, 4), np.nan)
    observed = np.zeros((m, n), dtype=bool)
    provenance = []
    for i, s in enumerate(series):
        pos = np.searchsorted(stamps, s.timestamps)
        hit = (pos < n) & (stamps[np.minimum(pos, n - 1)] == s.timestamps)
        ohlc[i, pos[hit]] = s.ohlc[hit]
        observed[i, pos[hit]] = True
        provenance.append((str(paths[i]), int(s.timestamps.size), int(hit.sum())))
        if not hit.any():
            raise AlignmentError(f"{paths[i]}: no timestamp overlaps the grid")
        if (~hit).any():
            logger.info("%s: %d rows off the grid dropped", paths[i], int((~hit).sum()))
    return PricePanel(
        asset_ids=tuple(s.asset_id for s in series),
        timestamps=stamps,
        ohlc=ohlc,
        observed=observed,
        period_seconds=int(period),
        provenance=tuple(provenance),
    )


def fill_missing(panel: PricePanel) -> PricePanel:
    """Flat fake price movements for missing periods.

    Before the first observation every channel takes that observation's close;
    later gaps repeat the previous observed close, so the price relative across
    any filled stretch is exactly 1.
    """
    ohlc = np.array(panel.ohlc)
    for i in range(panel.m):
        seen = np.flatnonzero(panel.observed[i] & ~np.isnan(ohlc[i, :, CLOSE]))
        if seen.size == 0:
            raise DataError(f"asset {panel.asset_ids[i]} has no observations")
        missing = np.isnan(ohlc[i]).any(axis=1)
        if not missing.any():
            continue
        first = seen[0]
        ohlc[i, :first] = ohlc[i, first, CLOSE]
        last_close = ohlc[i, first, CLOSE]
        for t in range(first, panel.n):
            if missing[t]:
                ohlc[i, t] = last_close
            else:
                last_close = ohlc[i, t, CLOSE]
    return PricePanel(
        asset_ids=panel.asset_ids,
        timestamps=panel.timestamps.copy(),
        ohlc=ohlc,
        observed=panel.observed.copy(),
        period_seconds=panel.period_seconds,
        provenance=panel.provenance,
    )


def window_at(panel: PricePanel, t: int, k: int = 30) -> PriceWindow:
    """Periods ``[t-k, t)`` divided per asset by the close of period ``t-1``."""
    if k < 1 or t < k or t > panel.n:
        raise ContractError(f"window_at needs k <= t <= n; got t={t}, k={k}, n={panel.n}")
    raw = panel.ohlc[:, t - k:t, :]
    values = raw / raw[:, -1:, CLOSE:CLOSE + 1]
    if np.isnan(values).any():
        raise DataError("window contains missing prices; run fill_missing first")
    return PriceWindow(values=values)


def windows_for(panel: PricePanel, periods: Sequence[int], k: int) -> np.ndarray:
    """Stack of normalized windows for several decision periods, shape (len, m, k, 4)."""
    periods = np.asarray(periods)
    if periods.size and (periods.min() < k or periods.max() > panel.n):
        raise ContractError("windows_for: period out of range")
    offsets = np.arange(-k, 0)
    raw = panel.ohlc[:, periods[:, None] + offsets[None, :], :]  # (m, len, k, 4)
    raw = raw.transpose(1, 0, 2, 3)
    return raw / raw[:, :, -1:, CLOSE:CLOSE + 1]


def price_relative(panel: PricePanel, t: int) -> np.ndarray:
    """``x[0] = 1``; ``x[i] = close_i(t) / close_i(t-1)``."""
    if t < 1 or t >= panel.n:
        raise ContractError(f"price_relative needs 1 <= t < n; got t={t}")
    closes = panel.ohlc[:, :, CLOSE]
    x = np.ones(panel.m + 1)
    x[1:] = closes[:, t] / closes[:, t - 1]
    return x
