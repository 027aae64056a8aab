"""Batch command line: ``crossturn {synth,stats,series,pairs,sobol,theory}``.

Every run is described by a :class:`RunConfig`, read from a TOML file given
with ``--config`` and overridden by flags.  All outputs are CSV (plus a
markdown copy of metric tables) written under ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import experiments as ex
from .alphas import ExpressionError, evaluate_alpha, parse
from .estimators import AlphaSet, build_alpha_set, estimate_series
from .market_data import DataError, SyntheticSpec, compute_returns, generate_synthetic, load_panel, write_panel
from .statistics import alpha_stats, sample_covariance, PnlSeries
from .theory import run_theory_checks
from .turnover import TurnoverSeries

__all__ = ["ConfigError", "RunConfig", "load_config", "main"]

COMMANDS = ("synth", "stats", "series", "pairs", "sobol", "theory")
TABLE_IDS = ("kl_pair", "kl_spectral", "t1", "t2", "t3", "t4", "tmax")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    data: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    days: int = 1600
    assets: int = 100
    seed: int = 0
    alphas: tuple[str, ...] = ("paper1", "paper2", "paper3", "paper4")
    start: str | None = None
    end: str | None = None
    window: int = 250
    estimators: tuple[str, ...] = TABLE_IDS
    count: int = 100
    weights: tuple[float, ...] | None = None
    out: str = "out"
    name: str = "set"
    jobs: int = 1
    std_convention: str = "paper"
    rho5: str = "mean"
    spectral_matrix: str = "correlation"

    def validate(self, command: str) -> None:
        if self.window < 2:
            raise ConfigError(f"window: must be >= 2, got {self.window}")
        if self.days < 2 or self.assets < 1:
            raise ConfigError("days/assets: need days >= 2 and assets >= 1")
        if self.count < 1:
            raise ConfigError(f"count: must be >= 1, got {self.count}")
        if self.jobs < 1:
            raise ConfigError(f"jobs: must be >= 1, got {self.jobs}")
        if self.std_convention not in ("paper", "textbook"):
            raise ConfigError(f"std_convention: expected paper or textbook, got {self.std_convention!r}")
        if self.rho5 not in ("mean", "sum"):
            raise ConfigError(f"rho5: expected mean or sum, got {self.rho5!r}")
        if self.spectral_matrix not in ("covariance", "correlation"):
            raise ConfigError(
                f"spectral_matrix: expected covariance or correlation, got {self.spectral_matrix!r}"
            )
        unknown = [e for e in self.estimators if e not in TABLE_IDS]
        if unknown:
            raise ConfigError(f"estimators: unknown ids {unknown}; choose from {TABLE_IDS}")
        needed = 1 if command == "stats" else 2
        if command in ("stats", "series", "pairs", "sobol") and len(self.alphas) < needed:
            raise ConfigError(f"alphas: {command} needs at least {needed} alpha(s)")
        if self.weights is not None and len(self.weights) != len(self.alphas):
            raise ConfigError(
                f"weights: {len(self.weights)} weights for {len(self.alphas)} alphas"
            )


_SCALARS = {f.name for f in fields(RunConfig)} - {"synthetic"}
_INTS = {"days", "assets", "seed", "window", "count", "jobs"}
_STRS = {"data", "start", "end", "out", "name", "std_convention", "rho5", "spectral_matrix"}


def _check_type(key: str, value):
    if key in _INTS and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if key in _STRS and not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    if key in ("alphas", "estimators"):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{key}: expected a list of strings")
        return tuple(value)
    if key == "weights":
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError("weights: expected a list of numbers")
        return tuple(float(v) for v in value)
    return value


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML run config.  Unknown keys are errors."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: {path}: {exc}") from None
    kwargs = {}
    for key, value in raw.items():
        if key == "synthetic":
            if not isinstance(value, dict):
                raise ConfigError("synthetic: must be a table")
            known = {f.name for f in fields(SyntheticSpec)}
            bad = set(value) - known
            if bad:
                raise ConfigError(f"synthetic.{sorted(bad)[0]}: unknown key")
            try:
                kwargs["synthetic"] = SyntheticSpec(**value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"synthetic: {exc}") from None
        elif key in _SCALARS:
            kwargs[key] = _check_type(key, value)
        else:
            raise ConfigError(f"{key}: unknown config key")
    return RunConfig(**kwargs)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


@dataclass
class Backtest:
    names: list[str]
    panels: list
    alpha_set: AlphaSet
    pnls: list[PnlSeries]
    turnovers: list[TurnoverSeries]


def _panel(cfg: RunConfig):
    if cfg.data:
        return load_panel(cfg.data)
    return generate_synthetic(cfg.seed, cfg.days, cfg.assets, cfg.synthetic)


def run_backtest(cfg: RunConfig) -> Backtest:
    panel = _panel(cfg)
    returns = compute_returns(panel)
    names, panels = [], []
    for k, text in enumerate(cfg.alphas):
        try:
            expr = parse(text)
        except ExpressionError as exc:
            raise ConfigError(f"alphas[{k}]: {exc}") from None
        names.append(text)
        panels.append(evaluate_alpha(expr, panel, name=text))
    alpha_set = build_alpha_set(panels, returns, cfg.start, cfg.end)
    pnls = [
        PnlSeries(alpha_set.days, alpha_set.pnl[:, k], names[k]) for k in range(alpha_set.n)
    ]
    turnovers = [TurnoverSeries(alpha_set.days, alpha_set.tau[:, k]) for k in range(alpha_set.n)]
    return Backtest(names, panels, alpha_set, pnls, turnovers)


def _select(rows: list[ex.MetricsRow], cfg: RunConfig) -> list[ex.MetricsRow]:
    return [r for r in rows if r.estimator in cfg.estimators or r.estimator == "tmax"]


def _write_tables(rows, cfg: RunConfig, kind: str, out: Path) -> list[Path]:
    stem = out / f"{cfg.name}_{kind}"
    return [
        ex.write_table_csv(rows, stem.with_suffix(".csv")),
        ex.write_table_markdown(rows, stem.with_suffix(".md"), f"{cfg.name}: {kind}"),
    ]


def cmd_synth(cfg: RunConfig, out: Path) -> list[Path]:
    panel = generate_synthetic(cfg.seed, cfg.days, cfg.assets, cfg.synthetic)
    return write_panel(panel, out / "data")


def cmd_stats(cfg: RunConfig, out: Path) -> list[Path]:
    bt = run_backtest(cfg)
    stats = [
        alpha_stats(p, t, cfg.std_convention) for p, t in zip(bt.pnls, bt.turnovers)
    ]
    written = [ex.write_stats_csv(bt.names, stats, out / f"{cfg.name}_stats.csv")]
    if len(bt.names) >= 2:
        corr = sample_covariance(bt.alpha_set.pnl).correlation().matrix
    else:
        corr = np.ones((1, 1))
    written.append(ex.write_matrix_csv(bt.names, corr, out / f"{cfg.name}_correlation.csv"))
    return written


def cmd_series(cfg: RunConfig, out: Path) -> list[Path]:
    bt = run_backtest(cfg)
    n = bt.alpha_set.n
    weights = np.asarray(cfg.weights, float) if cfg.weights else np.full(n, 1.0 / n)
    kl = "auto" if np.all(weights > 0) or n > 2 else "spectral"
    series = estimate_series(
        bt.alpha_set, weights, cfg.window, kl=kl, spectral_matrix=cfg.spectral_matrix
    )
    return [
        ex.write_series_csv(series, out / f"{cfg.name}_series.csv"),
        ex.write_cumulative_pnl_csv(bt.alpha_set, out / f"{cfg.name}_cumpnl.csv"),
    ]


def cmd_pairs(cfg: RunConfig, out: Path) -> list[Path]:
    bt = run_backtest(cfg)
    res = ex.run_pairs_experiment(bt.alpha_set, cfg.window, rho5=cfg.rho5, jobs=cfg.jobs)
    for a, b, why in res.excluded:
        print(f"warning: pair ({a}, {b}) excluded: {why}", file=sys.stderr)
    return _write_tables(_select(res.table, cfg), cfg, "pairs", out)


def cmd_sobol(cfg: RunConfig, out: Path) -> list[Path]:
    bt = run_backtest(cfg)
    res = ex.run_sobol_experiment(
        bt.alpha_set,
        cfg.count,
        cfg.window,
        rho5=cfg.rho5,
        spectral_matrix=cfg.spectral_matrix,
        jobs=cfg.jobs,
    )
    return _write_tables(_select(res.table, cfg), cfg, "sobol", out)


def cmd_theory(cfg: RunConfig, out: Path) -> list[Path]:
    rows = run_theory_checks(seed=cfg.seed)
    path = out / f"{cfg.name}_theory.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    failed = [r["check"] for r in rows if not r["passed"]]
    if failed:
        raise RuntimeError(f"theory checks failed: {failed}")
    return [path]


HANDLERS = {
    "synth": cmd_synth,
    "stats": cmd_stats,
    "series": cmd_series,
    "pairs": cmd_pairs,
    "sobol": cmd_sobol,
    "theory": cmd_theory,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run config")
    common.add_argument("--data", help="directory of per-ticker CSVs or a long-format CSV")
    common.add_argument("--out", help="output directory")
    common.add_argument("--window", type=int, help="rolling window in days")
    common.add_argument("--seed", type=int, help="seed for synthetic data and sampling")
    common.add_argument("--jobs", type=int, help="parallel workers for experiments")
    common.add_argument("--days", type=int, help="synthetic panel length")
    common.add_argument("--assets", type=int, help="synthetic panel width")
    common.add_argument("--alpha", action="append", dest="alphas", help="alpha expression (repeatable)")
    common.add_argument("--start", help="first test date (ISO)")
    common.add_argument("--end", help="last test date (ISO)")
    common.add_argument("--count", type=int, help="number of Sobol portfolios")
    common.add_argument("--weights", type=float, nargs="+", help="portfolio weights for series")
    common.add_argument("--estimators", nargs="+", help=f"subset of {' '.join(TABLE_IDS)}")
    common.add_argument("--name", help="output file prefix")
    common.add_argument("--std-convention", dest="std_convention", choices=("paper", "textbook"))
    common.add_argument("--rho5", choices=("mean", "sum"))
    common.add_argument("--spectral-matrix", dest="spectral_matrix", choices=("covariance", "correlation"))

    parser = argparse.ArgumentParser(
        prog="crossturn", description="Portfolio turnover under crossing of trades."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "write a seeded synthetic OHLCV panel as CSV",
        "stats": "per-alpha statistics and return correlations",
        "series": "per-day estimates, real turnover and cumulative PnL",
        "pairs": "metrics averaged over equal-weight alpha pairs",
        "sobol": "metrics averaged over Sobol-weighted portfolios",
        "theory": "numerical checks of the covariance model",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    for key in _SCALARS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = tuple(value) if isinstance(value, list) else value
    return replace(cfg, **overrides)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate(args.command)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        written = HANDLERS[args.command](cfg, out)
    except (ConfigError, DataError, ExpressionError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
