"""Monte-Carlo checks of the growth-rate bounds behind the cost-sensitive reward.

For sampled discrete return distributions ``r`` and distributions over
rebalancing pairs ``(a, a_hat)``:

* ``h(r) = E log r - lam Var(log r)`` never exceeds ``E log r``;
* when every outcome lies in ``(1, e]``, ``Var(log r) <= 1/4`` and so
  ``h(r) >= E log r - lam / 4``;
* the expected turnover ``E ||a - a_hat||_1`` is positive and at most
  ``2 (1 - psi) / (1 + psi)``, so the penalized objective sits within
  ``(9/4) lam + 2 gamma (1 - psi) / (1 + psi)`` of ``E log r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRID = (1e-4, 1e-3, 1e-2, 1e-1)
SLACK = 1e-12


@dataclass
class Violation:
    check: str
    sample: int
    detail: dict


@dataclass
class BoundsReport:
    samples: int
    checks: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        state = "ok" if self.passed else f"{len(self.violations)} violation(s)"
        return f"theorem bounds: {self.samples} samples, {self.checks} checks, {state}"


def log_moments(log_r: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    mean = float(p @ log_r)
    var = float(p @ (log_r - mean) ** 2)
    return mean, var


def sandwich_width(lam: float, gamma: float, psi: float) -> float:
    return 2.25 * lam + 2.0 * gamma * (1.0 - psi) / (1.0 + psi)


def _random_distribution(rng, low: float, high: float, open_low: bool = False):
    size = int(rng.integers(1, 9))
    log_r = rng.uniform(low, high, size)
    if open_low:
        log_r = np.where(log_r <= low, high, log_r)  # keep the support strictly above low
    return log_r, rng.dirichlet(np.ones(size))


def _random_pairs(rng):
    d = int(rng.integers(2, 7))
    count = int(rng.integers(2, 6))
    a = rng.dirichlet(np.ones(d), size=count)
    a_hat = rng.dirichlet(np.ones(d), size=count)
    return a, a_hat, rng.dirichlet(np.ones(count))


def verify_theorem_bounds(samples: int = 10_000, psi: float = 0.0025, seed: int = 0,
                          lams=GRID, gammas=GRID) -> BoundsReport:
    rng = np.random.default_rng(seed)
    report = BoundsReport(samples=samples)
    l1_cap = 2.0 * (1.0 - psi) / (1.0 + psi)

    def fail(check, i, **detail):
        report.violations.append(Violation(check, i, detail))

    for i in range(samples):
        lam = float(rng.choice(lams))
        gamma = float(rng.choice(gammas))

        # outcomes anywhere in [1/e, e]
        log_r, p = _random_distribution(rng, -1.0, 1.0)
        mean, var = log_moments(log_r, p)
        h = mean - lam * var
        report.checks += 1
        if h > mean + SLACK:
            fail("risk penalty raises objective", i, log_r=log_r.tolist(), p=p.tolist(), lam=lam)

        # outcomes in (1, e]
        log_pos, p_pos = _random_distribution(rng, 0.0, 1.0, open_low=True)
        mean_pos, var_pos = log_moments(log_pos, p_pos)
        report.checks += 2
        if var_pos > 0.25 + SLACK:
            fail("variance above 1/4 on (1, e]", i, log_r=log_pos.tolist(), p=p_pos.tolist(), var=var_pos)
        if mean_pos - lam * var_pos < mean_pos - lam / 4.0 - SLACK:
            fail("risk penalty below -lam/4 on (1, e]", i, log_r=log_pos.tolist(), p=p_pos.tolist(), lam=lam)

        # expected turnover and the combined sandwich
        a, a_hat, q = _random_pairs(rng)
        l1 = np.abs(a - a_hat).sum(axis=1)
        expected_l1 = float(q @ l1)
        gap = lam * var + gamma * expected_l1
        width = sandwich_width(lam, gamma, psi)
        report.checks += 2
        if not 0.0 < expected_l1 <= l1_cap + SLACK:
            fail("expected turnover outside (0, 2(1-psi)/(1+psi)]", i, expected_l1=expected_l1, psi=psi)
        if not -SLACK <= gap <= width + SLACK:
            fail("penalized objective outside the sandwich", i, gap=gap, width=width, lam=lam, gamma=gamma)
    return report


def two_point_log_variance(r1: float, r2: float) -> float:
    """Variance of ``log r`` for equal mass on two outcomes: ``((log r1 - log r2) / 2)^2``."""
    return ((math.log(r1) - math.log(r2)) / 2.0) ** 2
