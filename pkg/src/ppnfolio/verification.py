"""Self-checks run by the ``verify`` command: cost bounds, theorem bounds, gradients, reward algebra."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import verify_theorem_bounds
from .cost_model import CostSpec, risky_l1, solve_omega
from .gradcheck import TOLERANCE, op_suite, ppn_reward_check
from .reward import RewardConfig, compute_reward

PSI_GRID = (0.001, 0.0025, 0.01, 0.05)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    lines: list = field(default_factory=list)


def random_simplex_pairs(count: int, d: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Pairs of simplex points; about a third are sparse so corners and faces get exercised."""
    def draw():
        w = rng.dirichlet(np.ones(d), size=count)
        sparse = rng.random(count) < 1 / 3
        mask = rng.random((count, d)) < 0.5
        mask[np.arange(count), rng.integers(d, size=count)] = True
        w = np.where(sparse[:, None] & ~mask, 0.0, w)
        return w / w.sum(axis=1, keepdims=True)
    return draw(), draw()


def cost_bound_sweep(count: int = 10_000, d: int = 5, seed: int = 0, psis=PSI_GRID) -> SuiteResult:
    rng = np.random.default_rng(seed)
    a_hat, a_new = random_simplex_pairs(count, d, rng)
    lines, ok = [], True
    for psi in psis:
        spec = CostSpec.uniform(psi)
        omega = solve_omega(a_hat, a_new, spec, method="bisection")
        omega_fp = solve_omega(a_hat, a_new, spec, method="fixed_point")
        c = 1.0 - omega
        l1 = risky_l1(a_new, a_hat)
        slack = 1e-12
        lower = np.sum(c < psi / (1 + psi) * l1 - slack)
        upper = np.sum(c > psi / (1 - psi) * l1 + slack)
        ceiling = np.sum(c > 2 * psi / (1 + psi) + slack)
        agree = float(np.max(np.abs(omega - omega_fp)))
        bad = int(lower + upper + ceiling) + int(agree > 1e-12)
        ok &= bad == 0
        lines.append(f"psi={psi}: pairs={count} lower={int(lower)} upper={int(upper)} ceiling={int(ceiling)} "
                     f"solver_gap={agree:.1e} -> {'ok' if bad == 0 else 'FAIL'}")
    return SuiteResult("cost bounds", ok, lines)


def theorem_suite(samples: int = 10_000, seed: int = 0) -> SuiteResult:
    report = verify_theorem_bounds(samples=samples, seed=seed)
    lines = [report.summary()]
    for v in report.violations[:5]:
        lines.append(f"  {v.check} at sample {v.sample}: {v.detail}")
    return SuiteResult("theorem bounds", report.passed, lines)


def gradient_suite(seed: int = 0) -> SuiteResult:
    checks = op_suite(seed=seed) + [ppn_reward_check(seed=seed)]
    lines = [f"{c.name}: max rel err {c.max_rel_error:.1e} -> {'ok' if c.passed else 'FAIL'}" for c in checks]
    return SuiteResult(f"gradients (tol {TOLERANCE:g})", all(c.passed for c in checks), lines)


RewardFn = Callable[..., float]


def reward_algebra_suite(reward_fn: RewardFn = compute_reward, trials: int = 200, seed: int = 0) -> SuiteResult:
    """The reward against a direct evaluation, and the sign of each penalty."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    sign_errors = 0
    for _ in range(trials):
        T = int(rng.integers(2, 20))
        d = int(rng.integers(2, 6))
        r = 0.05 * rng.standard_normal(T)
        a = rng.dirichlet(np.ones(d), size=T)
        a_hat = rng.dirichlet(np.ones(d), size=T)
        lam, gamma = rng.choice([1e-4, 1e-3, 1e-2, 1e-1], size=2)
        expected = r.mean() - lam * r.var() - gamma / (T - 1) * np.abs(a[1:] - a_hat[1:]).sum()
        got = reward_fn(r, a, a_hat, RewardConfig(lam=lam, gamma=gamma))
        base = reward_fn(r, a, a_hat, RewardConfig())
        worst = max(worst, abs(got - expected))
        sign_errors += int(got > base + 1e-15)
    ok = worst <= 1e-12 and sign_errors == 0
    line = f"direct evaluation gap {worst:.1e}, penalties raising reward: {sign_errors} -> {'ok' if ok else 'FAIL'}"
    return SuiteResult("reward algebra", ok, [line])


def flipped_turnover_reward(log_returns, actions, drifted, cfg: RewardConfig) -> float:
    """Deliberately broken reward (turnover penalty added instead of subtracted), for mutation checks."""
    without = compute_reward(log_returns, actions, drifted, RewardConfig(lam=cfg.lam, gamma=0.0, variant=cfg.variant))
    return 2.0 * without - compute_reward(log_returns, actions, drifted, cfg)


def run_all(seed: int = 0, reward_fn: RewardFn = compute_reward, quick: bool = False) -> list[SuiteResult]:
    n = 1000 if quick else 10_000
    return [
        cost_bound_sweep(count=n, seed=seed),
        theorem_suite(samples=n, seed=seed),
        reward_algebra_suite(reward_fn, seed=seed),
        gradient_suite(seed=seed),
    ]
