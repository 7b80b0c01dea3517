"""Two-stream portfolio policy network.

Correlation stream: three blocks of (dilated causal conv, dilated causal conv,
cross-asset conv), then a [1 x k] valid conv, giving 16 features per asset.
Sequential stream: one LSTM shared across assets, 16 features per asset.
Both are concatenated with the previous risky weights (33 features per asset),
a fixed all-zero cash row is stacked on top, and a bias-free 1x1 conv plus
softmax produces the m+1 portfolio weights.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from . import checkpoint
from .backtest import DecisionContext, Strategy
from .errors import ConfigError, ContractError

KERNEL = 3


@dataclass(frozen=True)
class PpnConfig:
    m: int
    k: int = 30
    channels: tuple = (8, 16, 16)
    dilations: tuple = (1, 2, 4)
    lstm_hidden: int = 16
    conv4_channels: int = 16
    dropout: float = 0.2
    cash_bias: float = 0.0
    correlation: bool = True

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        if self.m < 1:
            raise ConfigError("need at least one risky asset")
        if len(self.channels) != len(self.dilations):
            raise ConfigError("one channel count per dilation block")
        widest = (KERNEL - 1) * max(self.dilations, default=1)
        if self.k < widest:
            raise ConfigError(f"window k={self.k} shorter than the widest dilated kernel span {widest}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["dilations"] = list(self.dilations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PpnConfig":
        return cls(**d)


def receptive_field(config: PpnConfig | None = None, dilations=None, kernel: int = KERNEL) -> int:
    """Periods seen by one output of the stacked causal convs (two per block)."""
    if dilations is None:
        dilations = config.dilations
    return 1 + sum(2 * (kernel - 1) * d for d in dilations)


def parameter_shapes(cfg: PpnConfig) -> list[tuple[str, tuple]]:
    shapes = []
    cin = 4
    for b, (cout, _) in enumerate(zip(cfg.channels, cfg.dilations), start=1):
        shapes += [(f"tccb{b}.dconv1.w", (cout, cin, KERNEL)), (f"tccb{b}.dconv1.b", (cout,)),
                   (f"tccb{b}.dconv2.w", (cout, cout, KERNEL)), (f"tccb{b}.dconv2.b", (cout,))]
        if cfg.correlation:
            shapes += [(f"tccb{b}.cconv.w", (cout, cout, cfg.m)), (f"tccb{b}.cconv.b", (cout,))]
        cin = cout
    h = cfg.lstm_hidden
    shapes += [("conv4.w", (cfg.conv4_channels, cin, cfg.k)), ("conv4.b", (cfg.conv4_channels,)),
               ("lstm.w_input", (4, 4 * h)), ("lstm.w_hidden", (h, 4 * h)), ("lstm.bias", (4 * h,)),
               ("decision.w", (1, cfg.conv4_channels + h + 1))]
    return shapes


def parameter_count(cfg: PpnConfig) -> int:
    return sum(int(np.prod(s)) for _, s in parameter_shapes(cfg))


def _fans(name: str, shape: tuple) -> tuple[int, int]:
    if name.startswith("lstm.w_input") or name.startswith("lstm.w_hidden"):
        return shape[0], shape[1]
    if len(shape) == 3:
        cout, cin, ks = shape
        return cin * ks, cout * ks
    return shape[1], shape[0]


class PolicyParameters:
    """All network weights in one flat float64 vector, exposed as named tensors.

    The tensors are views into ``theta``, so an in-place optimizer update of
    ``theta`` is seen by every layer. Adam moments live alongside.
    """

    def __init__(self, cfg: PpnConfig, theta: np.ndarray | None = None):
        self.cfg = cfg
        self.shapes = parameter_shapes(cfg)
        size = parameter_count(cfg)
        self.theta = np.zeros(size) if theta is None else np.array(theta, dtype=np.float64)
        if self.theta.shape != (size,):
            raise ContractError(f"parameter vector has {self.theta.size} entries, expected {size}")
        self.adam_m = np.zeros(size)
        self.adam_v = np.zeros(size)
        self.step = 0
        self.slices: dict[str, slice] = {}
        self.tensors: dict[str, ad.Tensor] = {}
        pos = 0
        for name, shape in self.shapes:
            n = int(np.prod(shape))
            self.slices[name] = slice(pos, pos + n)
            self.tensors[name] = ad.Tensor(self.theta[pos:pos + n].reshape(shape), requires_grad=True, name=name)
            pos += n

    @classmethod
    def initialize(cls, cfg: PpnConfig, seed: int = 0, zero_decision: bool = False) -> "PolicyParameters":
        rng = np.random.default_rng(seed)
        p = cls(cfg)
        for name, shape in p.shapes:
            view = p[name]
            if name.endswith(".b") or name == "lstm.bias":
                view[...] = 0.0
            else:
                fan_in, fan_out = _fans(name, shape)
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                view[...] = rng.uniform(-limit, limit, size=shape)
        h = cfg.lstm_hidden
        p["lstm.bias"][h:2 * h] = 1.0
        if zero_decision:
            p["decision.w"][...] = 0.0
        return p

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name].data

    def names(self) -> list[str]:
        return [n for n, _ in self.shapes]

    def tensor_list(self) -> list[ad.Tensor]:
        return [self.tensors[n] for n in self.names()]

    def flat_grad(self, grads: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([g.reshape(-1) for g in grads])

    def copy(self) -> "PolicyParameters":
        p = PolicyParameters(self.cfg, self.theta)
        p.adam_m[:] = self.adam_m
        p.adam_v[:] = self.adam_v
        p.step = self.step
        return p

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.theta)))

    # -- persistence --------------------------------------------------------
    def to_bytes(self, extra_meta: dict | None = None) -> bytes:
        arrays = {name: self[name] for name in self.names()}
        arrays["adam.m"] = self.adam_m
        arrays["adam.v"] = self.adam_v
        meta = {"config": self.cfg.to_dict(), "step": self.step}
        if extra_meta:
            meta.update(extra_meta)
        return checkpoint.dumps(arrays, meta)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "PolicyParameters":
        arrays, meta = checkpoint.loads(blob)
        cfg = PpnConfig.from_dict(meta["config"])
        p = cls(cfg)
        for name in p.names():
            if name not in arrays:
                raise ContractError(f"checkpoint lacks parameter {name}")
            p[name][...] = arrays[name]
        p.adam_m[:] = arrays.get("adam.m", 0.0)
        p.adam_v[:] = arrays.get("adam.v", 0.0)
        p.step = int(meta.get("step", 0))
        return p

    def save(self, path, extra_meta: dict | None = None) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes(extra_meta))

    @classmethod
    def load(cls, path) -> "PolicyParameters":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def describe(self) -> str:
        return json.dumps({n: list(s) for n, s in self.shapes})


def _block(x, params: PolicyParameters, b: int, dilation: int, cfg: PpnConfig, train: bool, rng):
    for conv in ("dconv1", "dconv2"):
        x = ad.dilated_causal_conv(x, params.tensors[f"tccb{b}.{conv}.w"], params.tensors[f"tccb{b}.{conv}.b"],
                                   dilation=dilation)
        x = ad.relu(ad.dropout(x, cfg.dropout, train, rng))
    if cfg.correlation:
        x = ad.correlational_conv(x, params.tensors[f"tccb{b}.cconv.w"], params.tensors[f"tccb{b}.cconv.b"])
        x = ad.relu(ad.dropout(x, cfg.dropout, train, rng))
    return x


def forward(window, prev_risky, params: PolicyParameters, train: bool = False,
            rng: np.random.Generator | None = None, streams: tuple = ("correlation", "sequential")):
    """Portfolio weights for one window ``(m, k, 4)`` or a batch ``(B, m, k, 4)``.

    ``prev_risky`` holds the previous action without the cash weight, shape
    ``(m,)`` or ``(B, m)``. Returns a tensor ``(m+1,)`` or ``(B, m+1)``.
    ``streams`` lets tests silence one stream (its features become zeros).
    """
    cfg = params.cfg
    x = ad.as_tensor(window)
    prev = np.asarray(prev_risky, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = ad.Tensor(x.data[None])
        prev = prev[None]
    B = x.shape[0]
    if x.shape[1:] != (cfg.m, cfg.k, 4):
        raise ContractError(f"input stage: window shape {x.shape[1:]} does not match (m={cfg.m}, k={cfg.k}, 4)")
    if prev.shape != (B, cfg.m):
        raise ContractError(f"input stage: previous action shape {prev.shape}, expected {(B, cfg.m)}")

    h = cfg.lstm_hidden
    if "correlation" in streams:
        z = x
        for b, d in enumerate(cfg.dilations, start=1):
            z = _block(z, params, b, d, cfg, train, rng)
        corr = ad.relu(ad.temporal_valid_conv(z, params.tensors["conv4.w"], params.tensors["conv4.b"]))
    else:
        corr = ad.Tensor(np.zeros((B, cfg.m, cfg.conv4_channels)))
    if "sequential" in streams:
        seq = ad.lstm(x, params.tensors["lstm.w_input"], params.tensors["lstm.w_hidden"], params.tensors["lstm.bias"])
    else:
        seq = ad.Tensor(np.zeros((B, cfg.m, h)))
    feats = ad.concat([corr, seq, ad.Tensor(prev[..., None])], axis=2)  # (B, m, 33)
    width = feats.shape[2]
    cash_row = ad.Tensor(np.full((B, 1, width), cfg.cash_bias))
    feats = ad.concat([cash_row, feats], axis=1)  # (B, m+1, 33)
    logits = ad.conv_1x1(feats, params.tensors["decision.w"])  # (B, m+1, 1)
    logits = ad.reshape(logits, (B, cfg.m + 1))
    out = ad.softmax(logits, axis=1)
    if single:
        out = ad.reshape(out, (cfg.m + 1,))
    return out


class PpnStrategy(Strategy):
    """Runs the network in evaluation mode, feeding back the last executed risky weights."""

    name = "PPN"

    def __init__(self, params: PolicyParameters, name: str = "PPN"):
        self.params = params
        self.name = name

    def reset(self, m: int) -> None:
        if m != self.params.cfg.m:
            raise ContractError(f"policy built for m={self.params.cfg.m}, panel has m={m}")

    def decide(self, ctx: DecisionContext) -> np.ndarray:
        if ctx.k != self.params.cfg.k:
            raise ContractError(f"policy window k={self.params.cfg.k}, backtest uses k={ctx.k}")
        out = forward(ctx.window, ctx.prev_action[1:], self.params, train=False).data
        return out


def as_strategy(params: PolicyParameters, name: str = "PPN") -> PpnStrategy:
    return PpnStrategy(params, name=name)
