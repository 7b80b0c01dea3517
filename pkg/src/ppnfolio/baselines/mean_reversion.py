"""Mean-reversion strategies built on passive-aggressive simplex updates.

All of them move the previous portfolio along ``+/-(x_pred - mean(x_pred) 1)``
by the smallest step that restores a margin condition, then project back onto
the simplex.
"""

from __future__ import annotations

import math

import numpy as np

from .base import OnlineStrategy
from .simplex import project_simplex


def pamr_step(b, x, eps: float) -> np.ndarray:
    """Move away from assets that just did well until ``b.x <= eps``."""
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    loss = max(0.0, float(b @ x) - eps)
    direction = x - x.mean()
    denom = float(direction @ direction)
    if loss == 0.0 or denom == 0.0:
        return b.copy()
    return project_simplex(b - (loss / denom) * direction)


def reversion_step(b, x_pred, eps: float) -> np.ndarray:
    """Move toward assets predicted to recover until ``b.x_pred >= eps``."""
    b = np.asarray(b, dtype=np.float64)
    x_pred = np.asarray(x_pred, dtype=np.float64)
    gap = max(0.0, eps - float(b @ x_pred))
    direction = x_pred - x_pred.mean()
    denom = float(direction @ direction)
    if gap == 0.0 or denom == 0.0:
        return b.copy()
    return project_simplex(b + (gap / denom) * direction)


def relative_prices(history: np.ndarray, window: int) -> np.ndarray:
    """Past prices over the current price, newest first: rows ``p_{t-i} / p_t``.

    ``history`` holds relatives oldest first; the first output row is all ones.
    At most ``window`` rows are returned (fewer while history is short).
    """
    rows = min(window, len(history) + 1)
    out = np.ones((rows, history.shape[1]))
    for i in range(1, rows):
        out[i] = out[i - 1] / history[-i]
    return out


def l1_median(points: np.ndarray, tol: float = 1e-6, max_iter: int = 200,
              trace: list | None = None) -> np.ndarray:
    """Spatial median by the modified Weiszfeld iteration.

    The modification handles iterates that land on a data point, where the plain
    update divides by zero. ``trace`` (if given) collects the objective value at
    every iterate.
    """
    points = np.asarray(points, dtype=np.float64)
    mu = points.mean(axis=0)

    def objective(c):
        return float(np.linalg.norm(points - c, axis=1).sum())

    if trace is not None:
        trace.append(objective(mu))
    for _ in range(max_iter):
        dist = np.linalg.norm(points - mu, axis=1)
        at_point = dist == 0.0
        eta = float(at_point.sum())  # multiplicity of the data point at mu
        far = ~at_point
        if not far.any():
            break
        inv = 1.0 / dist[far]
        t_tilde = (points[far] * inv[:, None]).sum(axis=0) / inv.sum()
        r = np.linalg.norm(((points[far] - mu) * inv[:, None]).sum(axis=0))
        gamma_ratio = eta / r if r > 0 else (math.inf if eta else 0.0)
        nxt = max(0.0, 1.0 - gamma_ratio) * t_tilde + min(1.0, gamma_ratio) * mu
        if trace is not None:
            trace.append(objective(nxt))
        done = np.abs(nxt - mu).sum() <= tol * np.abs(nxt).sum()
        mu = nxt
        if done:
            break
    return mu


class PAMR(OnlineStrategy):
    name = "PAMR"

    def __init__(self, eps: float = 0.5):
        super().__init__(eps=eps)
        self.eps = float(eps)

    def update(self, b, history, ctx):
        return pamr_step(b, history[-1], self.eps)


class OLMAR(OnlineStrategy):
    """Predicts the next relative as the moving average of past prices over today's."""

    name = "OLMAR"

    def __init__(self, window: int = 5, eps: float = 10.0):
        super().__init__(window=window, eps=eps)
        self.window, self.eps = int(window), float(eps)

    def update(self, b, history, ctx):
        x_pred = relative_prices(history, self.window).mean(axis=0)
        return reversion_step(b, x_pred, self.eps)


class RMR(OnlineStrategy):
    """Like OLMAR but with the L1-median of the window, which resists outliers."""

    name = "RMR"

    def __init__(self, window: int = 5, eps: float = 10.0, tol: float = 1e-6, max_iter: int = 200):
        super().__init__(window=window, eps=eps, tol=tol, max_iter=max_iter)
        self.window, self.eps = int(window), float(eps)
        self.tol, self.max_iter = float(tol), int(max_iter)

    def update(self, b, history, ctx):
        x_pred = l1_median(relative_prices(history, self.window), self.tol, self.max_iter)
        return reversion_step(b, x_pred, self.eps)


class WMAMR(OnlineStrategy):
    """Passive-aggressive reversion against a linearly weighted average of recent relatives."""

    name = "WMAMR"

    def __init__(self, window: int = 5, eps: float = 0.5):
        super().__init__(window=window, eps=eps)
        self.window, self.eps = int(window), float(eps)

    def update(self, b, history, ctx):
        recent = history[-self.window:]
        weights = np.arange(1, len(recent) + 1, dtype=np.float64)
        x_pred = weights @ recent / weights.sum()
        return pamr_step(b, x_pred, self.eps)


def cwmr_lambda(M: float, V: float, D: float, eps: float, phi: float) -> float:
    """Nonnegative multiplier making ``mu.x + phi x^T Sigma x = eps`` after the update.

    After a step of size ``lam`` the mean return is ``M - lam D`` and the variance
    ``V / (1 + 2 lam phi V)``, which leads to
    ``2 phi V D lam^2 + (D - 2 phi V (M - eps)) lam - (M - eps + phi V) = 0``.
    """
    a = 2.0 * phi * V * D
    b = D - 2.0 * phi * V * (M - eps)
    c = -(M - eps + phi * V)
    if c >= 0.0:
        return 0.0  # constraint already satisfied at lam = 0
    if a > 0.0:
        disc = b * b - 4.0 * a * c
        return max(0.0, (-b + math.sqrt(disc)) / (2.0 * a))
    if b > 0.0:
        return max(0.0, -c / b)
    return 0.0


class CWMR(OnlineStrategy):
    """Confidence-weighted mean reversion (variance form).

    Keeps a Gaussian belief ``N(mu, Sigma)`` over portfolios; ``mu`` is played
    after projection onto the simplex.
    """

    name = "CWMR"

    def __init__(self, eps: float = 0.5, phi: float = 2.0):
        super().__init__(eps=eps, phi=phi)
        self.eps, self.phi = float(eps), float(phi)

    def setup(self, m: int) -> None:
        d = m + 1
        self.sigma = np.eye(d) / d ** 2

    def update(self, b, history, ctx):
        x = history[-1]
        S = self.sigma
        d = x.size
        ones = np.ones(d)
        Sx = S @ x
        M = float(b @ x)
        V = float(x @ Sx)
        W = float(ones @ Sx)
        x_bar = W / float(ones @ S @ ones)
        D = V - x_bar * W
        lam = cwmr_lambda(M, V, D, self.eps, self.phi)
        if lam == 0.0:
            return b.copy()
        mu = b - lam * (S @ (x - x_bar))
        S = S - (2.0 * lam * self.phi) * np.outer(Sx, Sx) / (1.0 + 2.0 * lam * self.phi * V)
        self.sigma = S / (d * np.trace(S))
        return project_simplex(mu)
