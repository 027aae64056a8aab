"""Daily OHLCV panels: CSV ingestion, simple returns and a seeded generator.

A panel is rectangular over ``dates x tickers``.  Cells that are absent (a
ticker that has not started trading yet) hold NaN in every field; interior
gaps are forward-filled on load so that position arithmetic stays total.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DataError",
    "OhlcvPanel",
    "ReturnsPanel",
    "SyntheticSpec",
    "load_panel",
    "write_panel",
    "compute_returns",
    "generate_synthetic",
]

FIELDS = ("open", "high", "low", "close", "volume")
HEADER = ("date",) + FIELDS


class DataError(ValueError):
    """Raised for malformed or unusable market data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OhlcvPanel:
    """Aligned daily prices over ``p`` dates and ``s`` assets.

    Matrices are ``[p, s]``; absent cells are NaN in every field.
    """

    dates: np.ndarray
    tickers: tuple[str, ...]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self) -> None:
        dates = np.asarray(self.dates, dtype="datetime64[D]").copy()
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))
        for name in FIELDS:
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        self.validate()

    @property
    def p(self) -> int:
        return self.close.shape[0]

    @property
    def s(self) -> int:
        return self.close.shape[1]

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.close)

    def series(self, name: str) -> np.ndarray:
        if name not in FIELDS:
            raise KeyError(f"unknown series {name!r}; expected one of {FIELDS}")
        return getattr(self, name)

    def validate(self) -> None:
        shape = (len(self.dates), len(self.tickers))
        for name in FIELDS:
            if getattr(self, name).shape != shape:
                raise DataError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )
        if len(self.dates) > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise DataError("dates must be strictly increasing")
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers")
        present = self.present
        for name in FIELDS:
            if np.any(np.isnan(getattr(self, name)) & present):
                raise DataError(f"{name} missing on a cell with a close price")
        o, h, l, c, v = (getattr(self, f)[present] for f in FIELDS)
        if np.any(c <= 0):
            raise DataError("close prices must be positive")
        if np.any(h < np.maximum(o, c)) or np.any(l > np.minimum(o, c)):
            raise DataError("high/low inconsistent with open/close")
        if np.any(v < 0):
            raise DataError("negative volume")

    def equals(self, other: "OhlcvPanel") -> bool:
        if self.tickers != other.tickers or not np.array_equal(self.dates, other.dates):
            return False
        return all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
            for f in FIELDS
        )


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    """Simple close-to-close returns; row ``j`` is panel day ``j + 1``."""

    dates: np.ndarray
    returns: np.ndarray
    tickers: tuple[str, ...] = field(default=())

    @property
    def days(self) -> np.ndarray:
        """0-based panel day index of each row."""
        return np.arange(1, self.returns.shape[0] + 1)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _parse_number(text: str, where: str, name: str) -> float:
    text = text.strip()
    if text == "":
        return np.nan
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{where}: {name} is not a number: {text!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{where}: {name} is not finite: {text!r}")
    return value


def _parse_rows(rows: Iterable[tuple[int, list[str]]], path: Path) -> dict[dt.date, list[float]]:
    out: dict[dt.date, list[float]] = {}
    for lineno, row in rows:
        where = f"{path}:{lineno}"
        if len(row) != len(HEADER):
            raise DataError(f"{where}: expected {len(HEADER)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise DataError(f"{where}: bad date {row[0]!r}") from None
        if day in out:
            raise DataError(f"{where}: duplicate date {day}")
        o, h, l, c, v = (_parse_number(t, where, n) for t, n in zip(row[1:], FIELDS))
        if np.isnan(c):
            out[day] = [np.nan] * 5
            continue
        if np.isnan(o) or np.isnan(h) or np.isnan(l):
            raise DataError(f"{where}: open/high/low missing while close is present")
        if c <= 0:
            raise DataError(f"{where}: non-positive close {c}")
        if h < l:
            raise DataError(f"{where}: high {h} < low {l}")
        if h < max(o, c) or l > min(o, c):
            raise DataError(f"{where}: high/low do not bracket open/close")
        if np.isnan(v):
            v = 0.0
        if v < 0:
            raise DataError(f"{where}: negative volume {v}")
        out[day] = [o, h, l, c, v]
    return out


def _read_ticker_file(path: Path) -> dict[dt.date, list[float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise DataError(f"{path}:1: header must be {','.join(HEADER)}")
        rows = ((i, row) for i, row in enumerate(reader, start=2) if row)
        return _parse_rows(rows, path)


def _read_long_file(path: Path) -> dict[str, dict[dt.date, list[float]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}:1: empty file")
        header = tuple(h.strip().lower() for h in header)
        if header == HEADER:
            rows = [(i, row) for i, row in enumerate(reader, start=2) if row]
            return {path.stem: _parse_rows(rows, path)}
        if header != ("ticker",) + HEADER:
            raise DataError(f"{path}:1: header must be ticker,{','.join(HEADER)}")
        grouped: dict[str, list[tuple[int, list[str]]]] = {}
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            grouped.setdefault(row[0].strip(), []).append((i, row[1:]))
    return {t: _parse_rows(rows, path) for t, rows in grouped.items()}


def _forward_fill(values: np.ndarray) -> np.ndarray:
    """Fill interior gaps of one ticker's ``[p, 5]`` block in place."""
    valid = ~np.isnan(values[:, 3])
    if not valid.any():
        return values
    first = int(np.argmax(valid))
    for d in range(first + 1, values.shape[0]):
        if not valid[d]:
            c = values[d - 1, 3]
            values[d] = (c, c, c, c, 0.0)
    return values


def load_panel(path: str | Path, universe: Sequence[str] | None = None) -> OhlcvPanel:
    """Load a panel from a directory of per-ticker CSVs or a single CSV file.

    Per-ticker files are named ``<TICKER>.csv`` with header
    ``date,open,high,low,close,volume``.  A single file may instead carry a
    leading ``ticker`` column (long format).  Dates are intersected across
    tickers.  An empty close marks a missing day: leading gaps stay absent,
    later gaps are forward-filled from the previous close with zero volume.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise DataError(f"{path}: no .csv files")
        raw = {f.stem: _read_ticker_file(f) for f in files}
    elif path.is_file():
        raw = _read_long_file(path)
    else:
        raise DataError(f"{path}: no such file or directory")

    if universe is not None:
        missing = [t for t in universe if t not in raw]
        if missing:
            raise DataError(f"tickers not found in {path}: {missing}")
        tickers = list(universe)
    else:
        tickers = sorted(raw)
    if not tickers:
        raise DataError(f"{path}: no tickers")

    common = set.intersection(*(set(raw[t]) for t in tickers))
    if not common:
        raise DataError(f"{path}: tickers share no dates")
    dates = sorted(common)

    block = np.full((len(dates), len(tickers), 5), np.nan)
    for j, t in enumerate(tickers):
        rows = raw[t]
        block[:, j, :] = _forward_fill(np.array([rows[d] for d in dates], dtype=float))
        if np.count_nonzero(~np.isnan(block[:, j, 3])) < 2:
            raise DataError(f"{path}: ticker {t} has fewer than 2 valid closes")

    return OhlcvPanel(
        np.array(dates, dtype="datetime64[D]"),
        tuple(tickers),
        *(block[:, :, k] for k in range(5)),
    )


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


def write_panel(panel: OhlcvPanel, directory: str | Path) -> list[Path]:
    """Write one ``<TICKER>.csv`` per asset; absent cells become empty fields."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for j, t in enumerate(panel.tickers):
        out = directory / f"{t}.csv"
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for d, day in enumerate(panel.dates):
                w.writerow([str(day)] + [_fmt(getattr(panel, f)[d, j]) for f in FIELDS])
        written.append(out)
    return written


# ---------------------------------------------------------------------------
# Returns
# ---------------------------------------------------------------------------


def compute_returns(panel: OhlcvPanel) -> ReturnsPanel:
    close = panel.close
    if close.shape[0] < 2:
        raise DataError("need at least 2 days to compute returns")
    if np.any(close[~np.isnan(close)] <= 0):
        raise DataError("non-positive close encountered")
    rets = close[1:] / close[:-1] - 1.0
    rets.setflags(write=False)
    return ReturnsPanel(panel.dates[1:], rets, panel.tickers)


# ---------------------------------------------------------------------------
# Synthetic panels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the geometric random walk used by :func:`generate_synthetic`.

    ``volatility`` and ``drift`` are per-day log-return moments.  ``intraday``
    scales the open gap and the high/low excursions relative to ``volatility``.
    """

    volatility: float = 0.02
    drift: float = 0.0
    intraday: float = 0.5
    start_price: float = 100.0
    volume_mean: float = 1.0e6
    volume_dispersion: float = 0.5
    start_date: str = "2018-01-02"

    def __post_init__(self) -> None:
        if self.volatility < 0 or self.intraday < 0 or self.volume_dispersion < 0:
            raise ValueError("volatility, intraday and volume_dispersion must be >= 0")
        if self.start_price <= 0 or self.volume_mean < 0:
            raise ValueError("start_price must be > 0 and volume_mean >= 0")


def generate_synthetic(
    seed: int, p: int, s: int, spec: SyntheticSpec | None = None
) -> OhlcvPanel:
    """Deterministic random-walk panel of ``p`` business days and ``s`` assets."""
    if p < 2 or s < 1:
        raise ValueError(f"need p >= 2 and s >= 1, got p={p}, s={s}")
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(seed)

    z = rng.standard_normal((p, s))
    z[0] = 0.0
    log_growth = np.cumsum(spec.drift + spec.volatility * z, axis=0)
    log_growth[0] = 0.0
    close = spec.start_price * np.exp(log_growth)

    wiggle = spec.volatility * spec.intraday
    prev = np.vstack([close[:1], close[:-1]])
    open_ = prev * np.exp(wiggle * rng.standard_normal((p, s)))
    high = np.maximum(open_, close) * np.exp(wiggle * np.abs(rng.standard_normal((p, s))))
    low = np.minimum(open_, close) * np.exp(-wiggle * np.abs(rng.standard_normal((p, s))))
    volume = spec.volume_mean * np.exp(
        spec.volume_dispersion * rng.standard_normal((p, s))
        - 0.5 * spec.volume_dispersion**2
    )
    volume = np.round(volume)

    start = np.datetime64(spec.start_date, "D")
    dates = np.busday_offset(start, np.arange(p), roll="forward")
    tickers = tuple(f"S{j:04d}" for j in range(s))
    return OhlcvPanel(dates, tickers, open_, high, low, close, volume)
