"""Run configuration: one JSON file per run, command-line flags override file values.

Precedence, lowest to highest: built-in defaults, the config file, CLI flags.
The resolved configuration is hashed (canonical JSON, SHA-256) and the hash is
stamped on every output file.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .cost_model import CostSpec
from .errors import ConfigError
from .ppn import PpnConfig
from .reward import RewardConfig
from .training import TrainConfig

GRID = [1e-4, 1e-3, 1e-2, 1e-1]

DEFAULTS = {
    "assets": [],             # empty: use the bundled synthetic panel
    "period_seconds": None,   # inferred from the first file when absent
    "window_k": 30,
    "train_range": [0, 1600],
    "test_range": [1600, 2000],
    "seed": 0,
    "cost": {"psi": 0.0025, "psi_p": None, "psi_s": None},
    "reward": {"lambda": 1e-4, "gamma": 1e-3, "variant": "cost_sensitive"},
    "train": {"batch_size": 128, "learning_rate": 1e-3, "steps": 2000, "sampler": "uniform",
              "geometric_bias": 5e-3},
    "ppn": {"channels": [8, 16, 16], "dilations": [1, 2, 4], "lstm_hidden": 16, "dropout": 0.2,
            "correlation": True},
    "sweep": {"lambdas": GRID, "gammas": GRID},
    "strategies": {},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "strategies":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a table")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = _merge(cfg, raw)
        base = Path(path).parent
        cfg["assets"] = [str((base / p) if not Path(p).is_absolute() else p) for p in cfg["assets"]]
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def _check_grid(name: str, values) -> None:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{name} must be a non-empty list")
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"{name} entries must be nonnegative numbers; got {v!r}")


def validate(cfg: dict) -> None:
    for key in ("train_range", "test_range"):
        r = cfg[key]
        if not (isinstance(r, list) and len(r) == 2 and all(isinstance(v, int) for v in r) and r[0] < r[1]):
            raise ConfigError(f"{key} must be [start, stop) with start < stop")
    if cfg["test_range"][0] < cfg["window_k"]:
        raise ConfigError("test_range must start at or after window_k")
    _check_grid("sweep.lambdas", cfg["sweep"]["lambdas"])
    _check_grid("sweep.gammas", cfg["sweep"]["gammas"])
    # constructing the typed configs runs their own checks
    cost_spec(cfg)
    reward_config(cfg)
    train_config(cfg)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def cost_spec(cfg: dict) -> CostSpec:
    c = cfg["cost"]
    psi = c["psi"]
    return CostSpec(psi_p=psi if c.get("psi_p") is None else c["psi_p"],
                    psi_s=psi if c.get("psi_s") is None else c["psi_s"])


def reward_config(cfg: dict, lam=None, gamma=None) -> RewardConfig:
    r = cfg["reward"]
    return RewardConfig(lam=r["lambda"] if lam is None else lam,
                        gamma=r["gamma"] if gamma is None else gamma, variant=r["variant"])


def train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    spec = cost_spec(cfg)
    return TrainConfig(batch_size=t["batch_size"], learning_rate=t["learning_rate"], steps=t["steps"],
                       seed=cfg["seed"], psi=0.5 * (spec.psi_p + spec.psi_s), sampler=t["sampler"],
                       geometric_bias=t["geometric_bias"])


def ppn_config(cfg: dict, m: int) -> PpnConfig:
    p = cfg["ppn"]
    return PpnConfig(m=m, k=cfg["window_k"], channels=tuple(p["channels"]), dilations=tuple(p["dilations"]),
                     lstm_hidden=p["lstm_hidden"], dropout=p["dropout"], correlation=p["correlation"])
