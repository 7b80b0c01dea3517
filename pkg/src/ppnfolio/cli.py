"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 verification failure.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import load_config
from .errors import (AlignmentError, ConfigError, ContractError, DataError, ParseError,
                     TrainingDiverged)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class VerificationFailed(Exception):
    pass


def _overrides(seed=None, steps=None, psi=None, batch_size=None) -> dict:
    over: dict = {}
    if seed is not None:
        over["seed"] = seed
    if steps is not None:
        over.setdefault("train", {})["steps"] = steps
    if batch_size is not None:
        over.setdefault("train", {})["batch_size"] = batch_size
    if psi is not None:
        over["cost"] = {"psi": psi}
    return over


def _parse_param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _report(record) -> None:
    click.echo(f"config_hash {record.config_hash}")
    for name, m in record.metrics.items():
        click.echo(f"{name}: apv={m['apv']!r} sr={m['sr']!r} mdd={m['mdd']!r} to={m['to']!r}")
    click.echo(f"wall-clock {record.wall_clock:.2f}s", err=True)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    """Cost-sensitive portfolio selection: backtests, baselines, policy training."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@cli.command()
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--period-seconds", type=int, default=None, help="Grid spacing; inferred when omitted.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Write gap-filled CSVs here.")
def ingest(files, period_seconds, out_dir) -> None:
    """Parse, align and gap-fill per-asset OHLC files."""
    from .market_data import fill_missing, ingest_panel, write_asset_csv

    raw = ingest_panel(list(files), period_seconds=period_seconds)
    panel = fill_missing(raw)
    click.echo(f"assets {panel.m} periods {panel.n} period_seconds {panel.period_seconds}")
    for (path, rows, hits), asset, observed in zip(raw.provenance, panel.asset_ids, raw.observed):
        click.echo(f"{asset}: {rows} rows from {path}, {hits} on grid, {panel.n - int(observed.sum())} filled")
    click.echo(f"fingerprint {panel.fingerprint()}")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, asset in enumerate(panel.asset_ids):
            write_asset_csv(out / f"{asset}.csv", panel.timestamps, panel.ohlc[i])


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--strategy", default="all", show_default=True,
              help="Strategy name, comma-separated list, or 'all'.")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Trained policy for the 'ppn' strategy.")
@click.option("--param", "params", multiple=True, help="Strategy parameter key=value (single strategy only).")
@click.option("--psi", type=float, default=None, help="Override the cost rate.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs/backtest", show_default=True)
def backtest(config_path, strategy, checkpoint, params, psi, seed, out_dir) -> None:
    """Backtest strategies over the test range and write ledgers and metrics."""
    from .reporting import backtest_command

    over = _overrides(seed=seed, psi=psi)
    if params:
        if "," in strategy or strategy.lower() == "all":
            raise ConfigError("--param needs a single --strategy")
        over["strategies"] = {strategy.lower(): dict(_parse_param(p) for p in params)}
    cfg = load_config(config_path, over)
    if strategy.lower() == "ppn" and checkpoint is None:
        raise ConfigError("strategy ppn needs --checkpoint")
    _report(backtest_command(cfg, strategy, checkpoint, Path(out_dir)))


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--psi", type=float, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs/train", show_default=True)
def train(config_path, seed, steps, batch_size, psi, out_dir) -> None:
    """Train the policy network; writes checkpoint.bin, training_log.csv, record.json."""
    from .reporting import train_command

    cfg = load_config(config_path, _overrides(seed=seed, steps=steps, psi=psi, batch_size=batch_size))
    _report(train_command(cfg, Path(out_dir)))


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Grid cells trained in parallel.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs/sweep", show_default=True)
def sweep(config_path, seed, steps, batch_size, jobs, out_dir) -> None:
    """Train and evaluate over the lambda x gamma grid; writes sweep.csv."""
    from .reporting import sweep_command

    cfg = load_config(config_path, _overrides(seed=seed, steps=steps, batch_size=batch_size))
    record = sweep_command(cfg, Path(out_dir), jobs=jobs)
    click.echo(f"config_hash {record.config_hash}: {len(record.metrics)} cells")
    click.echo(f"wall-clock {record.wall_clock:.2f}s", err=True)


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--quick", is_flag=True, help="1,000 samples per Monte-Carlo suite instead of 10,000.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Also write the report here.")
@click.option("--mutate", type=click.Choice(["none", "l1-sign"]), default="none", hidden=True)
def verify(seed, quick, out_path, mutate) -> None:
    """Run the cost-bound, theorem-bound, reward and gradient self-checks."""
    from .reward import compute_reward
    from .verification import flipped_turnover_reward, run_all

    reward_fn = flipped_turnover_reward if mutate == "l1-sign" else compute_reward
    results = run_all(seed=seed, reward_fn=reward_fn, quick=quick)
    lines = []
    for suite in results:
        lines.append(f"[{'PASS' if suite.passed else 'FAIL'}] {suite.name}")
        lines.extend(f"    {line}" for line in suite.lines)
    text = "\n".join(lines) + "\n"
    click.echo(text, nl=False)
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(text)
    if not all(s.passed for s in results):
        raise VerificationFailed("one or more verification suites failed")


@cli.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
def report(run_dir) -> None:
    """Print the metric table of a finished run directory."""
    from .reporting import report_table

    path = Path(run_dir)
    if not (path / "record.json").exists():
        raise ConfigError(f"{run_dir} has no record.json")
    click.echo(report_table(path), nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="ppnfolio", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except (ConfigError, ContractError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        click.echo(f"error: {exc}", err=True)
        if exc.last_good is not None:
            Path("last_good_checkpoint.bin").write_bytes(exc.last_good)
            click.echo("last good parameters written to last_good_checkpoint.bin", err=True)
        return EXIT_DATA
    except (ParseError, AlignmentError, DataError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except VerificationFailed as exc:
        click.echo(f"verification failed: {exc}", err=True)
        return EXIT_VERIFY
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
