"""Central finite-difference checks for every differentiable operation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad

STEP = 1e-5
TOLERANCE = 1e-4
FLOOR = 1e-6  # entries smaller than this are compared on an absolute scale


@dataclass
class GradCheck:
    name: str
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < TOLERANCE


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = FLOOR) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def numeric_grad(f: Callable[[], float], x: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of ``f`` with respect to ``x``, perturbed in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        up = f()
        x[i] = orig - h
        down = f()
        x[i] = orig
        g[i] = (up - down) / (2.0 * h)
    return g


def check(name: str, build: Callable[..., ad.Tensor], arrays: list[np.ndarray],
          h: float = STEP) -> GradCheck:
    """Compare tape gradients of ``build(*tensors)`` (a scalar) with finite differences."""
    tensors = [ad.Tensor(a, requires_grad=True) for a in arrays]
    with ad.Tape() as tape:
        out = build(*tensors)
        grads = tape.backward(out, tensors)

    def value():
        return float(build(*[ad.Tensor(a) for a in arrays]).data)

    worst = 0.0
    for arr, g in zip(arrays, grads):
        worst = max(worst, relative_error(g, numeric_grad(value, arr, h)))
    return GradCheck(name, worst)


def _project(out: ad.Tensor, weights: np.ndarray) -> ad.Tensor:
    return ad.tsum(ad.mul(out, weights))


def op_suite(m: int = 3, k: int = 8, seed: int = 0) -> list[GradCheck]:
    """Gradient checks for each layer and elementwise op on small random instances."""
    rng = np.random.default_rng(seed)

    def r(*shape, scale=1.0):
        return scale * rng.standard_normal(shape)

    results = []

    def run(name, fn, arrays, out_shape):
        w = r(*out_shape)
        results.append(check(name, lambda *ts: _project(fn(*ts), w), arrays))

    run("add", ad.add, [r(m, k), r(m, k)], (m, k))
    run("sub", ad.sub, [r(m, k), r(1, k)], (m, k))
    run("mul", ad.mul, [r(m, k), r(m, 1)], (m, k))
    run("div", ad.div, [r(m, k), 2.0 + rng.random((m, k))], (m, k))
    run("square", ad.square, [r(m, k)], (m, k))
    run("log", ad.log, [0.5 + rng.random((m, k))], (m, k))
    run("exp", ad.exp, [r(m, k)], (m, k))
    run("abs", ad.tabs, [r(m, k)], (m, k))
    run("sum", lambda a: ad.tsum(a, axis=1), [r(m, k)], (m,))
    run("mean", lambda a: ad.mean(a, axis=0, keepdims=True), [r(m, k)], (1, k))
    run("matmul", ad.matmul, [r(m, 4), r(4, k)], (m, k))
    run("reshape", lambda a: ad.reshape(a, (k, m)), [r(m, k)], (k, m))
    run("index", lambda a: ad.index(a, (slice(None), slice(1, None))), [r(m, k)], (m, k - 1))
    run("concat", lambda a, b: ad.concat([a, b], axis=1), [r(m, 2), r(m, 3)], (m, 5))
    run("relu", ad.relu, [r(m, k)], (m, k))
    run("sigmoid", ad.sigmoid, [r(m, k)], (m, k))
    run("tanh", ad.tanh, [r(m, k)], (m, k))
    run("softmax", lambda a: ad.softmax(a, axis=-1), [r(m, k)], (m, k))
    mask_rng_seed = int(rng.integers(1 << 31))
    run("dropout", lambda a: ad.dropout(a, 0.2, True, np.random.default_rng(mask_rng_seed)), [r(m, k)], (m, k))
    for d in (1, 2, 4):
        run(f"dilated_causal_conv(d={d})", lambda x, w, b, d=d: ad.dilated_causal_conv(x, w, b, dilation=d),
            [r(m, k, 4), r(5, 4, 3, scale=0.5), r(5)], (m, k, 5))
    run("correlational_conv", ad.correlational_conv, [r(m, k, 4), r(5, 4, m, scale=0.5), r(5)], (m, k, 5))
    run("temporal_valid_conv", ad.temporal_valid_conv, [r(m, k, 4), r(6, 4, k, scale=0.3), r(6)], (m, 6))
    run("conv_1x1", ad.conv_1x1, [r(m + 1, 7), r(1, 7), r(1)], (m + 1, 1))
    run("lstm", ad.lstm, [r(m, k, 4), r(4, 4 * 5, scale=0.5), r(5, 4 * 5, scale=0.5), r(4 * 5, scale=0.5)],
        (m, 5))
    return results


def ppn_reward_check(m: int = 3, k: int = 8, batch: int = 4, seed: int = 0,
                     lam: float = 0.1, gamma: float = 0.05, psi: float = 0.01) -> GradCheck:
    """Finite-difference check of the network parameters through the batch reward."""
    from .ppn import PolicyParameters, PpnConfig, forward
    from .reward import RewardConfig, compute_reward, surrogate_log_returns

    rng = np.random.default_rng(seed)
    cfg = PpnConfig(m=m, k=k, dropout=0.0)
    params = PolicyParameters.initialize(cfg, seed=seed)
    params.theta[:] += 0.1 * rng.standard_normal(params.theta.size)
    windows = np.exp(0.02 * rng.standard_normal((batch, m, k, 4)))
    windows[..., -1, 3] = 1.0
    prev = rng.dirichlet(np.ones(m + 1), size=batch)
    x = np.ones((batch, m + 1))
    x[:, 1:] = np.exp(0.03 * rng.standard_normal((batch, m)))
    drifted = rng.dirichlet(np.ones(m + 1), size=batch)
    reward_cfg = RewardConfig(lam=lam, gamma=gamma)

    def reward():
        a = forward(windows, prev[:, 1:], params, train=False)
        r = surrogate_log_returns(a, x, drifted, psi)
        return compute_reward(r, a, drifted, reward_cfg)

    tensors = params.tensor_list()
    with ad.Tape() as tape:
        out = reward()
        grads = tape.backward(out, tensors)
    analytic = params.flat_grad(grads)

    def value():
        return float(reward().data)

    numeric = numeric_grad(value, params.theta)
    return GradCheck("ppn forward + reward", relative_error(analytic, numeric))
