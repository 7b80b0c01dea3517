"""Follow-the-winner strategies: universal portfolios, exponentiated gradient, online Newton step."""

from __future__ import annotations

import numpy as np

from ..backtest import DecisionContext
from .base import OnlineStrategy
from .simplex import project_simplex_in_norm


class UP(OnlineStrategy):
    """Monte-Carlo universal portfolio.

    Samples constant-rebalanced portfolios from a flat Dirichlet over the risky
    simplex and plays their wealth-weighted average.
    """

    name = "UP"

    def __init__(self, samples: int = 10_000, seed: int = 0):
        super().__init__(samples=samples, seed=seed)
        self.samples = int(samples)
        self.seed = int(seed)

    def setup(self, m: int) -> None:
        rng = np.random.default_rng(self.seed)
        risky = rng.dirichlet(np.ones(m), size=self.samples)
        self.crps = np.zeros((self.samples, m + 1))
        self.crps[:, 1:] = risky
        self.log_wealth = np.zeros(self.samples)
        self.b = self.crps.mean(axis=0)

    def update(self, b, history, ctx):
        self.log_wealth += np.log(self.crps @ history[-1])
        w = np.exp(self.log_wealth - self.log_wealth.max())
        out = w @ self.crps / w.sum()
        return out / out.sum()


class EG(OnlineStrategy):
    """Exponentiated gradient: ``b_i <- b_i exp(eta x_i / b.x)``, renormalized."""

    name = "EG"

    def __init__(self, eta: float = 0.05):
        super().__init__(eta=eta)
        self.eta = float(eta)

    def update(self, b, history, ctx):
        x = history[-1]
        w = b * np.exp(self.eta * x / (b @ x))
        return w / w.sum()


class ONS(OnlineStrategy):
    """Online Newton step with projection onto the simplex in the ``A_t`` norm.

    ``A_t = I + sum g g^T`` accumulates outer products of the log-wealth
    gradients ``g = x / (b.x)``; the ridge keeps it positive definite.
    """

    name = "ONS"

    def __init__(self, eta: float = 0.0, beta: float = 1.0, delta: float = 0.125):
        super().__init__(eta=eta, beta=beta, delta=delta)
        self.eta, self.beta, self.delta = float(eta), float(beta), float(delta)

    def setup(self, m: int) -> None:
        d = m + 1
        self.A = np.eye(d)
        self.g_sum = np.zeros(d)

    def update(self, b, history, ctx: DecisionContext):
        x = history[-1]
        g = x / (b @ x)
        self.A += np.outer(g, g)
        self.g_sum += (1.0 + 1.0 / self.beta) * g
        target = self.delta * np.linalg.solve(self.A, self.g_sum)
        p = project_simplex_in_norm(target, self.A)
        d = p.size
        return (1.0 - self.eta) * p + self.eta / d
