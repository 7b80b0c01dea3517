"""Cost-sensitive reward: mean log-return, minus a variance penalty, minus a turnover penalty.

    R = mean(r) - lam * popvar(r) - gamma / (T - 1) * sum_{t>=2} ||a_t - a_hat_{t-1}||_1

``r`` are log-returns net of costs. Works on plain arrays (returns a float) or
on autodiff tensors (returns a scalar tensor that can be differentiated).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ContractError

VARIANTS = ("log_return", "risk_sensitive", "cost_sensitive")


@dataclass(frozen=True)
class RewardConfig:
    lam: float = 0.0
    gamma: float = 0.0
    variant: str = "cost_sensitive"

    def __post_init__(self):
        if self.lam < 0 or self.gamma < 0:
            raise ConfigError(f"reward weights must be nonnegative; got lam={self.lam}, gamma={self.gamma}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown reward variant {self.variant!r}")

    @property
    def active_lam(self) -> float:
        return 0.0 if self.variant == "log_return" else self.lam

    @property
    def active_gamma(self) -> float:
        return self.gamma if self.variant == "cost_sensitive" else 0.0


@dataclass
class RewardTerms:
    reward: object
    mean_log_return: float
    variance: float
    turnover_penalty: float


def reward_terms(log_returns, actions, drifted, cfg: RewardConfig) -> RewardTerms:
    """Reward plus its three components (the components as floats, for logging)."""
    differentiable = any(isinstance(v, ad.Tensor) for v in (log_returns, actions, drifted))
    r = ad.as_tensor(log_returns)
    if r.ndim != 1 or r.shape[0] < 1:
        raise ContractError("log_returns must be a non-empty 1-d sequence")
    T = r.shape[0]
    lam, gamma = cfg.active_lam, cfg.active_gamma
    if T < 2 and (lam > 0 or gamma > 0):
        raise ContractError("variance and turnover terms need at least 2 periods")

    mu = ad.mean(r)
    total = mu
    var = ad.mean(ad.square(ad.sub(r, mu)))
    if lam > 0:
        total = ad.sub(total, ad.mul(var, lam))
    turnover = 0.0
    if T >= 2:
        a = ad.as_tensor(actions)
        a_hat = ad.as_tensor(drifted)
        if a.shape != a_hat.shape or a.shape[0] != T:
            raise ContractError(f"actions {a.shape} / drifted {a_hat.shape} do not match T={T}")
        gap = ad.tabs(ad.sub(ad.index(a, slice(1, None)), ad.index(a_hat, slice(1, None))))
        pen = ad.mul(ad.tsum(gap), 1.0 / (T - 1))
        turnover = float(pen.data)
        if gamma > 0:
            total = ad.sub(total, ad.mul(pen, gamma))
    out = total if differentiable else float(total.data)
    return RewardTerms(out, float(mu.data), float(var.data), turnover)


def compute_reward(log_returns, actions, drifted, cfg: RewardConfig):
    return reward_terms(log_returns, actions, drifted, cfg).reward


def surrogate_log_returns(actions, relatives, drifted, psi: float):
    """Net log-returns with the linearized cost ``psi * ||a - a_hat||_1`` over risky assets.

    ``actions`` may be a tensor (B, m+1); ``relatives`` and ``drifted`` are constants.
    """
    a = ad.as_tensor(actions)
    gross = ad.tsum(ad.mul(a, relatives), axis=1)
    out = ad.log(gross)
    if psi > 0:
        risky = (slice(None), slice(1, None))
        l1 = ad.tsum(ad.tabs(ad.sub(ad.index(a, risky), np.asarray(drifted)[risky])), axis=1)
        out = ad.add(out, ad.log(ad.sub(1.0, ad.mul(l1, psi))))
    return out
