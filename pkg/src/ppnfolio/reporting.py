"""Run orchestration and report files shared by the command-line interface."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .backtest import BacktestLedger, run_backtest
from .baselines import REGISTRY, make_strategy
from .config import config_hash, cost_spec, ppn_config, reward_config, train_config
from .errors import ConfigError
from .market_data import PricePanel, fill_missing, ingest_panel
from .metrics import MetricBlock, compute_metrics
from .ppn import PolicyParameters, as_strategy
from .synthetic import bundled_panel
from .training import TrainResult, evaluate, train

BASELINE_ORDER = ("ubah", "best", "crp", "up", "eg", "anticor", "ons", "cwmr", "pamr", "olmar", "rmr", "wmamr")


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    version: str
    dataset: str
    metrics: dict = field(default_factory=dict)
    wall_clock: float = 0.0  # reported on stderr, kept out of files so reruns stay byte-identical

    def to_json(self) -> str:
        body = {"config_hash": self.config_hash, "seed": self.seed, "version": self.version,
                "dataset": self.dataset, "metrics": self.metrics}
        return json.dumps(body, sort_keys=True, indent=2) + "\n"


def load_panel(cfg: dict) -> PricePanel:
    if not cfg["assets"]:
        return bundled_panel()
    return fill_missing(ingest_panel(cfg["assets"], period_seconds=cfg["period_seconds"]))


def stamped_csv(header: list, rows: list, chash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash: {chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def ledger_csv(ledger: BacktestLedger, chash: str) -> str:
    return f"# config_hash: {chash}\n" + ledger.to_csv()


def _check_ranges(cfg: dict, panel: PricePanel) -> None:
    for key in ("train_range", "test_range"):
        if cfg[key][1] > panel.n:
            raise ConfigError(f"{key} {cfg[key]} exceeds the panel's {panel.n} periods")


def strategy_names(selector: str, has_checkpoint: bool) -> list[str]:
    selector = selector.lower()
    if selector == "all":
        return list(BASELINE_ORDER) + (["ppn"] if has_checkpoint else [])
    names = [s.strip() for s in selector.split(",") if s.strip()]
    for n in names:
        if n != "ppn" and n not in REGISTRY:
            raise ConfigError(f"unknown strategy {n!r}; choose from {sorted(REGISTRY) + ['ppn', 'all']}")
    return names


def build_strategy(name: str, cfg: dict, params: PolicyParameters | None):
    if name == "ppn":
        if params is None:
            raise ConfigError("strategy ppn needs --checkpoint")
        return as_strategy(params)
    kwargs = dict(cfg["strategies"].get(name, {}))
    if name == "up":
        kwargs.setdefault("seed", cfg["seed"])
    try:
        return make_strategy(name, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None


def run_backtests(cfg: dict, panel: PricePanel, names: list[str],
                  params: PolicyParameters | None = None) -> dict[str, tuple[BacktestLedger, MetricBlock]]:
    _check_ranges(cfg, panel)
    start, stop = cfg["test_range"]
    spec = cost_spec(cfg)
    out = {}
    for name in names:
        strategy = build_strategy(name, cfg, params)
        k = params.cfg.k if name == "ppn" else cfg["window_k"]
        ledger = run_backtest(panel, strategy, spec, k=k, start=start, stop=stop)
        out[name] = (ledger, compute_metrics(ledger))
    return out


def comparison_csv(results: dict, chash: str) -> str:
    rows = []
    for name, (_, mb) in results.items():
        rows.append([name, mb.apv, mb.sr_pct, "inf" if mb.cr_infinite else mb.cr, mb.to])
    return stamped_csv(["strategy", "apv", "sr_pct", "cr", "to"], rows, chash)


def backtest_command(cfg: dict, selector: str, checkpoint: str | None, out_dir: Path) -> RunRecord:
    t0 = time.perf_counter()
    panel = load_panel(cfg)
    params = PolicyParameters.load(checkpoint) if checkpoint else None
    names = strategy_names(selector, params is not None)
    if "ppn" in names and params is None:
        raise ConfigError("strategy ppn needs --checkpoint")
    results = run_backtests(cfg, panel, names, params)
    chash = config_hash(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = RunRecord(chash, cfg["seed"], __version__, panel.fingerprint())
    for name, (ledger, mb) in results.items():
        (out_dir / f"ledger_{name}.csv").write_text(ledger_csv(ledger, chash))
        equity = [[int(t), float(w)] for t, w in zip(ledger.periods, ledger.wealth[1:])]
        (out_dir / f"equity_{name}.csv").write_text(stamped_csv(["t", "wealth"], equity, chash))
        record.metrics[name] = mb.to_dict()
    (out_dir / "comparison.csv").write_text(comparison_csv(results, chash))
    (out_dir / "record.json").write_text(record.to_json())
    record.wall_clock = time.perf_counter() - t0
    return record


def train_once(cfg: dict, panel: PricePanel, lam=None, gamma=None) -> TrainResult:
    _check_ranges(cfg, panel)
    return train(panel, ppn_config(cfg, panel.m), reward_config(cfg, lam, gamma), train_config(cfg),
                 train_range=tuple(cfg["train_range"]))


def train_command(cfg: dict, out_dir: Path) -> RunRecord:
    t0 = time.perf_counter()
    panel = load_panel(cfg)
    result = train_once(cfg, panel)
    chash = config_hash(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.params.save(out_dir / "checkpoint.bin", {"config_hash": chash})
    (out_dir / "training_log.csv").write_text(f"# config_hash: {chash}\n" + result.log_csv())
    start, stop = cfg["test_range"]
    ledger = evaluate(result.params, panel, cost_spec(cfg), start, stop)
    record = RunRecord(chash, cfg["seed"], __version__, panel.fingerprint(),
                       {"ppn": compute_metrics(ledger).to_dict()})
    (out_dir / "record.json").write_text(record.to_json())
    record.wall_clock = time.perf_counter() - t0
    return record


def sweep_cell(cfg: dict, lam: float, gamma: float) -> list:
    panel = load_panel(cfg)
    result = train_once(cfg, panel, lam, gamma)
    start, stop = cfg["test_range"]
    mb = compute_metrics(evaluate(result.params, panel, cost_spec(cfg), start, stop))
    return [lam, gamma, mb.apv, mb.sr, mb.std, mb.mdd, mb.to]


def sweep_command(cfg: dict, out_dir: Path, jobs: int = 1) -> RunRecord:
    t0 = time.perf_counter()
    cells = [(lam, gamma) for lam in cfg["sweep"]["lambdas"] for gamma in cfg["sweep"]["gammas"]]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(sweep_cell, [cfg] * len(cells), *zip(*cells)))
    else:
        rows = [sweep_cell(cfg, lam, gamma) for lam, gamma in cells]
    chash = config_hash(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [[float(v) for v in row] for row in rows]
    (out_dir / "sweep.csv").write_text(
        stamped_csv(["lambda", "gamma", "apv", "sr", "std", "mdd", "to"], rows, chash))
    record = RunRecord(chash, cfg["seed"], __version__, load_panel(cfg).fingerprint(),
                       {f"lambda={r[0]!r},gamma={r[1]!r}": dict(zip(("apv", "sr", "std", "mdd", "to"), r[2:]))
                        for r in rows})
    (out_dir / "record.json").write_text(record.to_json())
    record.wall_clock = time.perf_counter() - t0
    return record


def report_table(run_dir: Path) -> str:
    """Plain-text metric table from a run directory's record."""
    record = json.loads((run_dir / "record.json").read_text())
    lines = [f"config {record['config_hash']}  dataset {record['dataset']}  seed {record['seed']}",
             f"{'strategy':<28}{'APV':>12}{'SR(%)':>10}{'CR':>12}{'MDD':>8}{'TO':>8}"]
    for name, m in record["metrics"].items():
        sr = m.get("sr", float("nan"))
        sr_pct = sr if isinstance(sr, str) else 100.0 * sr
        cr = m.get("cr", float("nan"))
        lines.append(f"{name:<28}{m['apv']:>12.4f}{_fmt(sr_pct):>10}{_fmt(cr):>12}"
                     f"{m.get('mdd', float('nan')):>8.3f}{m.get('to', float('nan')):>8.4f}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return v if isinstance(v, str) else f"{v:.3f}"
