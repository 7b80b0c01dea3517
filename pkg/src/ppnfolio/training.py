"""Direct policy-gradient training of the policy network with Adam.

Each step draws a contiguous run of decision periods from the training range,
runs the network on all of them at once (previous actions come from the
portfolio memory), scores the batch with the cost-sensitive reward using the
linearized cost, and takes one Adam ascent step on the reward.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .backtest import BacktestLedger, run_backtest
from .cost_model import CostSpec, drift_portfolio
from .errors import ConfigError, TrainingDiverged
from .market_data import PricePanel, windows_for
from .ppn import PolicyParameters, PpnConfig, as_strategy, forward
from .reward import RewardConfig, reward_terms, surrogate_log_returns

logger = logging.getLogger(__name__)

SAMPLERS = ("uniform", "geometric")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 1e-3
    steps: int = 2000
    seed: int = 0
    psi: float = 0.0025
    sampler: str = "uniform"
    geometric_bias: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be nonnegative")
        if self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {self.sampler!r}; choose from {SAMPLERS}")
        if not 0.0 <= self.psi < 1.0:
            raise ConfigError("psi must lie in [0, 1)")
        if not 0.0 < self.geometric_bias < 1.0:
            raise ConfigError("geometric_bias must lie in (0, 1)")


class PortfolioMemory:
    """Last emitted action per training period, uniform over m+1 assets until written."""

    def __init__(self, n_periods: int, m: int):
        self.slots = np.full((n_periods, m + 1), 1.0 / (m + 1))

    def read(self, periods) -> np.ndarray:
        return self.slots[periods].copy()

    def write(self, periods, actions) -> None:
        self.slots[periods] = actions


@dataclass
class Batch:
    start: int
    periods: np.ndarray
    windows: np.ndarray      # (B, m, k, 4)
    relatives: np.ndarray    # x_t, (B, m+1)
    prev_relatives: np.ndarray  # x_{t-1}, (B, m+1)
    prev_actions: np.ndarray    # memory slot of t-1, (B, m+1)

    @property
    def drifted(self) -> np.ndarray:
        return drift_portfolio(self.prev_actions, self.prev_relatives)


def valid_starts(train_range: tuple[int, int], k: int, batch_size: int) -> np.ndarray:
    lo, hi = train_range
    first, last = lo + k, hi - batch_size
    if last < first:
        raise ConfigError(f"training range of {hi - lo} periods is too short for k={k} "
                          f"and batch_size={batch_size}")
    return np.arange(first, last + 1)


def draw_start(starts: np.ndarray, cfg: TrainConfig, rng: np.random.Generator) -> int:
    if cfg.sampler == "uniform":
        return int(starts[rng.integers(starts.size)])
    # geometric decay toward the most recent start
    while True:
        back = int(rng.geometric(cfg.geometric_bias)) - 1
        if back < starts.size:
            return int(starts[-1 - back])


def sample_batch(panel: PricePanel, memory: PortfolioMemory, relatives: np.ndarray,
                 train_range: tuple[int, int], k: int, cfg: TrainConfig,
                 rng: np.random.Generator) -> Batch:
    starts = valid_starts(train_range, k, cfg.batch_size)
    start = draw_start(starts, cfg, rng)
    periods = np.arange(start, start + cfg.batch_size)
    return Batch(
        start=start,
        periods=periods,
        windows=windows_for(panel, periods, k),
        relatives=relatives[periods],
        prev_relatives=relatives[periods - 1],
        prev_actions=memory.read(periods - 1),
    )


@dataclass
class TrainResult:
    params: PolicyParameters
    log: list = field(default_factory=list)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "reward", "mean_log_return", "variance", "turnover_penalty"])
        for row in self.log:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


def adam_ascent(params: PolicyParameters, grad: np.ndarray, cfg: TrainConfig) -> None:
    params.step += 1
    params.adam_m *= cfg.beta1
    params.adam_m += (1.0 - cfg.beta1) * grad
    params.adam_v *= cfg.beta2
    params.adam_v += (1.0 - cfg.beta2) * grad * grad
    m_hat = params.adam_m / (1.0 - cfg.beta1 ** params.step)
    v_hat = params.adam_v / (1.0 - cfg.beta2 ** params.step)
    params.theta += cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def batch_reward(params: PolicyParameters, batch: Batch, reward_cfg: RewardConfig, psi: float,
                 train: bool = True, rng: np.random.Generator | None = None):
    """Differentiable batch reward; returns ``(terms, actions_tensor)``."""
    actions = forward(batch.windows, batch.prev_actions[:, 1:], params, train=train, rng=rng)
    drifted = batch.drifted
    r = surrogate_log_returns(actions, batch.relatives, drifted, psi)
    return reward_terms(r, actions, drifted, reward_cfg), actions


def train(panel: PricePanel, ppn_cfg: PpnConfig, reward_cfg: RewardConfig, cfg: TrainConfig,
          train_range: tuple[int, int] | None = None, params: PolicyParameters | None = None,
          log_every: int = 0) -> TrainResult:
    if ppn_cfg.m != panel.m:
        raise ConfigError(f"network built for m={ppn_cfg.m}, panel has m={panel.m}")
    train_range = train_range or (0, panel.n)
    valid_starts(train_range, ppn_cfg.k, cfg.batch_size)
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    init_seed = int(seeds[0].generate_state(1)[0])
    sample_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])
    if params is None:
        params = PolicyParameters.initialize(ppn_cfg, seed=init_seed)
    relatives = panel.relatives()
    memory = PortfolioMemory(panel.n, panel.m)
    result = TrainResult(params=params)
    tensors = params.tensor_list()
    for step in range(1, cfg.steps + 1):
        batch = sample_batch(panel, memory, relatives, train_range, ppn_cfg.k, cfg, sample_rng)
        with ad.Tape() as tape:
            terms, actions = batch_reward(params, batch, reward_cfg, cfg.psi, train=True, rng=dropout_rng)
            grads = tape.backward(terms.reward, tensors)
        grad = params.flat_grad(grads)
        value = float(terms.reward.data)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise TrainingDiverged(f"non-finite reward or gradient at step {step} "
                                   f"(reward={value}, batch start={batch.start})",
                                   step=step, last_good=params.to_bytes())
        adam_ascent(params, grad, cfg)
        memory.write(batch.periods, actions.data)
        result.log.append((step, value, terms.mean_log_return, terms.variance, terms.turnover_penalty))
        if log_every and step % log_every == 0:
            logger.info("step %d reward %.6g", step, value)
    return result


def evaluate(params: PolicyParameters, panel: PricePanel, spec: CostSpec,
             start: int, stop: int) -> BacktestLedger:
    return run_backtest(panel, as_strategy(params), spec, k=params.cfg.k, start=start, stop=stop)


def config_dict(ppn_cfg: PpnConfig, reward_cfg: RewardConfig, cfg: TrainConfig) -> dict:
    return {"ppn": ppn_cfg.to_dict(), "reward": asdict(reward_cfg), "train": asdict(cfg)}
