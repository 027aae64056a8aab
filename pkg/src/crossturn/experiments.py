"""Error metrics of turnover estimates and the all-pairs / Sobol experiments."""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .estimators import (
    AlphaSet,
    EstimateSeries,
    RollingInputs,
    estimate_series,
    rolling_inputs,
)
from .statistics import AlphaStats, CovarianceMatrix

__all__ = [
    "METRIC_COLUMNS",
    "MetricsRow",
    "ExperimentResult",
    "SobolSampler",
    "sobol_next",
    "metrics",
    "metrics_table",
    "average_tables",
    "sobol_weights",
    "run_pairs_experiment",
    "run_sobol_experiment",
    "ratio_spread",
    "classify_spread",
    "write_table_csv",
    "write_table_markdown",
    "write_series_csv",
    "write_cumulative_pnl_csv",
    "write_stats_csv",
    "write_matrix_csv",
]

METRIC_COLUMNS = ("estimator", "rho1", "rho2", "rho3", "rho4", "rho5")


@dataclass(frozen=True)
class MetricsRow:
    estimator: str
    rho1: float
    rho2: float
    rho3: float
    rho4: float
    rho5: float
    skipped_days: int = 0

    def values(self) -> np.ndarray:
        return np.array([self.rho1, self.rho2, self.rho3, self.rho4, self.rho5])

    def absolute(self, which: Iterable[str] = ("rho1", "rho3")) -> "MetricsRow":
        changes = {k: abs(getattr(self, k)) for k in which}
        return MetricsRow(**{**self.__dict__, **changes})


def metrics(
    estimate: np.ndarray, real: np.ndarray, tmax: np.ndarray, estimator: str = "", rho5: str = "mean"
) -> MetricsRow:
    """Mean error, mean absolute error, both scaled by the ``tmax`` mean error, and relative error.

    ``rho5`` averages ``|T - tau| / tau`` over days with ``tau > 0`` when
    ``rho5="mean"``; ``"sum"`` keeps the bare sum.  Days with ``tau = 0`` are
    skipped and counted in ``skipped_days``.  ``rho3``/``rho4`` are NaN when
    ``tmax`` never exceeds the real turnover (no crossing at all).
    """
    est = np.asarray(estimate, float)
    real = np.asarray(real, float)
    tmax = np.asarray(tmax, float)
    if not (est.shape == real.shape == tmax.shape) or est.ndim != 1 or est.size == 0:
        raise ValueError("estimate, real and tmax must be aligned non-empty 1-D series")
    p = est.size
    err = est - real
    rho1 = err.sum() / p
    rho2 = np.abs(err).sum() / p
    base = (tmax - real).sum() / p
    if base < -1e-12 * np.abs(tmax).mean():
        raise ValueError(f"real turnover exceeds tmax on average ({base})")
    if base <= 1e-12 * np.abs(tmax).mean():
        base = np.nan
    live = real > 0
    rel = np.abs(err[live]) / real[live]
    if rho5 == "mean":
        r5 = rel.sum() / p
    elif rho5 == "sum":
        r5 = rel.sum()
    else:
        raise ValueError(f"rho5 must be 'mean' or 'sum', got {rho5!r}")
    return MetricsRow(
        estimator, float(rho1), float(rho2), float(rho1 / base), float(rho2 / base), float(r5),
        int(p - live.sum()),
    )


def metrics_table(series: EstimateSeries, rho5: str = "mean") -> list[MetricsRow]:
    """One row per estimator in ``series``, ``tmax`` last."""
    ids = [k for k in series.values if k != "tmax"] + ["tmax"]
    return [metrics(series.values[k], series.real, series.tmax, k, rho5) for k in ids]


def average_tables(tables: Sequence[Sequence[MetricsRow]]) -> list[MetricsRow]:
    """Row-wise mean of tables sharing the same estimator order.

    NaN entries are excluded from their column's mean.
    """
    if not tables:
        raise ValueError("nothing to average")
    ids = [r.estimator for r in tables[0]]
    out = []
    for i, name in enumerate(ids):
        rows = [t[i] for t in tables]
        if any(r.estimator != name for r in rows):
            raise ValueError("tables list estimators in different orders")
        vals = np.array([r.values() for r in rows])
        count = np.sum(~np.isnan(vals), axis=0)
        # members with an undefined metric (no crossing at all) are left out
        mean = np.where(count > 0, np.nansum(vals, axis=0) / np.maximum(count, 1), np.nan)
        out.append(MetricsRow(name, *map(float, mean), sum(r.skipped_days for r in rows)))
    return out


# ---------------------------------------------------------------------------
# Sobol sequence
# ---------------------------------------------------------------------------

# Joe & Kuo (2008) primitive polynomials and initial direction numbers for
# dimensions 2..21: (degree s, coefficient bits a, m_1..m_s).
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)),
    (6, 22, (1, 3, 1, 15, 13, 25)),
    (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)),
    (7, 4, (1, 3, 7, 13, 13, 15, 69)),
)
_BITS = 32


def _directions(dim: int) -> np.ndarray:
    v = np.zeros((dim, _BITS + 1), dtype=np.uint64)
    v[0, 1:] = [1 << (_BITS - i) for i in range(1, _BITS + 1)]
    for j in range(1, dim):
        s, a, m = _JOE_KUO[j - 1]
        row = [0] * (_BITS + 1)
        for i in range(1, min(s, _BITS) + 1):
            row[i] = m[i - 1] << (_BITS - i)
        for i in range(s + 1, _BITS + 1):
            row[i] = row[i - s] ^ (row[i - s] >> s)
            for k in range(1, s):
                if (a >> (s - 1 - k)) & 1:
                    row[i] ^= row[i - k]
        v[j] = row
    return v


class SobolSampler:
    """Gray-code Sobol points in ``(0, 1)^dim``, starting after the origin."""

    MAX_DIM = len(_JOE_KUO) + 1

    def __init__(self, dim: int):
        if not 1 <= dim <= self.MAX_DIM:
            raise ValueError(f"Sobol dimension must be in 1..{self.MAX_DIM}, got {dim}")
        self.dim = dim
        self.index = 0
        self._v = _directions(dim)
        self._x = np.zeros(dim, dtype=np.uint64)

    def next(self) -> np.ndarray:
        # Gray code: flip the direction of the lowest zero bit of the old index.
        c = 1
        k = self.index
        while k & 1:
            k >>= 1
            c += 1
        if c > _BITS:
            raise OverflowError("Sobol sequence exhausted")
        self._x ^= self._v[:, c]
        self.index += 1
        return self._x.astype(float) / float(1 << _BITS)

    def take(self, count: int) -> np.ndarray:
        return np.array([self.next() for _ in range(count)])


def sobol_next(sampler: SobolSampler) -> np.ndarray:
    return sampler.next()


def sobol_weights(n: int, count: int) -> np.ndarray:
    """``count`` weight vectors: Sobol points rescaled to sum to one."""
    pts = SobolSampler(n).take(count)
    return pts / pts.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ExperimentResult:
    table: list[MetricsRow]
    members: list[list[MetricsRow]]
    excluded: list[tuple]


def run_pairs_experiment(
    alpha_set: AlphaSet,
    window: int = 250,
    *,
    rho5: str = "mean",
    jobs: int = 1,
) -> ExperimentResult:
    """Every unordered pair as an equal-weight portfolio; averaged metrics.

    ``|rho1|`` and ``|rho3|`` are taken per pair before averaging.  Pairs
    that cannot be evaluated are listed in ``excluded`` with the reason.
    """
    if alpha_set.n < 2:
        raise ValueError("pairs experiment needs at least 2 alphas")
    rolling = rolling_inputs(alpha_set, window)
    pairs = list(itertools.combinations(range(alpha_set.n), 2))

    def one(pair):
        i, j = pair
        sub = alpha_set.subset(pair)
        idx = np.ix_(pair, pair)
        cached = RollingInputs(
            window,
            rolling.tau_bar[:, list(pair)],
            rolling.cov[:, idx[0], idx[1]],
            CovarianceMatrix(rolling.full_cov.matrix[idx]),
        )
        try:
            series = estimate_series(sub, [0.5, 0.5], window, kl="pair", rolling=cached)
            return [r.absolute(("rho1", "rho3")) for r in metrics_table(series, rho5)], None
        except ValueError as exc:
            return None, (alpha_set.names[i], alpha_set.names[j], str(exc))

    results = _map(one, pairs, jobs)
    members = [t for t, _ in results if t is not None]
    excluded = [e for _, e in results if e is not None]
    if not members:
        raise ValueError(f"no pair could be evaluated: {excluded}")
    return ExperimentResult(average_tables(members), members, excluded)


def run_sobol_experiment(
    alpha_set: AlphaSet,
    count: int = 100,
    window: int = 250,
    *,
    rho5: str = "mean",
    spectral_matrix: str = "correlation",
    jobs: int = 1,
) -> ExperimentResult:
    """Portfolios of all alphas with Sobol weights; metrics averaged in absolute value."""
    if alpha_set.n < 2:
        raise ValueError("Sobol experiment needs at least 2 alphas")
    if count < 1:
        raise ValueError("count must be >= 1")
    rolling = rolling_inputs(alpha_set, window)
    weights = sobol_weights(alpha_set.n, count)

    def one(x):
        series = estimate_series(
            alpha_set, x, window, kl="spectral", spectral_matrix=spectral_matrix, rolling=rolling
        )
        return [r.absolute(METRIC_COLUMNS[1:]) for r in metrics_table(series, rho5)]

    members = _map(one, list(weights), jobs)
    return ExperimentResult(average_tables(members), members, [])


def ratio_spread(stats: Sequence[AlphaStats]) -> tuple[float, float, float]:
    """``(min, max, max/min)`` of the turnover-to-std ratios."""
    ratios = np.array([s.ratio if isinstance(s, AlphaStats) else s for s in stats], float)
    if ratios.size == 0 or np.any(~np.isfinite(ratios)) or np.any(ratios <= 0):
        raise ValueError("every ratio must be defined and positive")
    lo, hi = float(ratios.min()), float(ratios.max())
    return lo, hi, hi / lo


def classify_spread(spread: float) -> str:
    """``narrow`` up to 1.25x, ``wide`` from 4x, ``medium`` in between."""
    if spread <= 1.25:
        return "narrow"
    if spread >= 4.0:
        return "wide"
    return "medium"


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_table_csv(rows: Sequence[MetricsRow], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([r.estimator] + [_num(v) for v in r.values()])
    return path


def write_table_markdown(rows: Sequence[MetricsRow], path: str | Path, title: str = "") -> Path:
    path = Path(path)
    cells = [list(METRIC_COLUMNS)] + [
        [r.estimator] + [f"{v:.3f}" for v in r.values()] for r in rows
    ]
    widths = [max(len(row[c]) for row in cells) for c in range(len(METRIC_COLUMNS))]
    lines = [f"# {title}", ""] if title else []
    fmt = lambda row: "| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"
    lines.append(fmt(cells[0]))
    lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    lines.extend(fmt(row) for row in cells[1:])
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_series_csv(series: EstimateSeries, path: str | Path) -> Path:
    """Columns ``date,real,kl,t1,t2,t3,t4,tmax``."""
    path = Path(path)
    kl = series.values.get(series.kl_id, np.full(len(series.days), np.nan))
    cols = [series.real, kl] + [series.values[k] for k in ("t1", "t2", "t3", "t4", "tmax")]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "real", "kl", "t1", "t2", "t3", "t4", "tmax"])
        for j, day in enumerate(series.dates):
            w.writerow([str(day)] + [_num(c[j]) for c in cols])
    return path


def write_cumulative_pnl_csv(alpha_set: AlphaSet, path: str | Path) -> Path:
    """Per alpha: daily PnL and its running sum, long format."""
    path = Path(path)
    cum = np.cumsum(alpha_set.pnl, axis=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "alpha", "pnl", "cum_pnl"])
        for j, d in enumerate(alpha_set.days):
            for k, name in enumerate(alpha_set.names):
                w.writerow([str(alpha_set.dates[d]), name, _num(alpha_set.pnl[j, k]), _num(cum[j, k])])
    return path


def write_stats_csv(names: Sequence[str], stats: Sequence[AlphaStats], path: str | Path) -> Path:
    """Columns ``alpha,cumPnL,sharpe,T,stdPnL,T_over_std``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "cumPnL", "sharpe", "T", "stdPnL", "T_over_std"])
        for name, s in zip(names, stats):
            w.writerow([name] + [_num(v) for v in s.as_row().values()])
    return path


def write_matrix_csv(names: Sequence[str], matrix: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha"] + list(names))
        for name, row in zip(names, matrix):
            w.writerow([name] + [_num(v) for v in row])
    return path
