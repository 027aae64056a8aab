"""Alpha performance statistics, covariance of alpha returns and its spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .alphas import PositionPanel
from .market_data import ReturnsPanel
from .turnover import TurnoverSeries

__all__ = [
    "TRADING_DAYS",
    "PnlSeries",
    "AlphaStats",
    "CovarianceMatrix",
    "RollingCovariance",
    "EigenDecomposition",
    "DegenerateCovarianceError",
    "alpha_pnl",
    "std_pnl",
    "alpha_stats",
    "align_pnls",
    "sample_covariance",
    "rolling_mean",
    "rolling_covariance",
    "eigendecompose",
    "whiten",
]

TRADING_DAYS = 252


@dataclass(frozen=True, eq=False)
class PnlSeries:
    """Daily PnL ``pnl[j]`` earned on 0-based panel day ``days[j]``."""

    days: np.ndarray
    pnl: np.ndarray
    name: str = ""

    def __len__(self) -> int:
        return len(self.pnl)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.pnl)


@dataclass(frozen=True)
class AlphaStats:
    cum_pnl: float
    sharpe: float
    std_pnl: float
    mean_turnover: float
    ratio: float

    def as_row(self) -> dict[str, float]:
        return {
            "cumPnL": self.cum_pnl,
            "sharpe": self.sharpe,
            "T": self.mean_turnover,
            "stdPnL": self.std_pnl,
            "T_over_std": self.ratio,
        }


def alpha_pnl(positions: PositionPanel, returns: ReturnsPanel) -> PnlSeries:
    """Holding PnL with delay 1: ``PnL(d) = sum_i return_i(d) a_i(d-1)``."""
    if returns.returns.shape != (positions.p - 1, positions.s):
        raise ValueError(
            f"returns shape {returns.returns.shape} does not match positions "
            f"{positions.positions.shape} minus one day"
        )
    if not np.array_equal(returns.dates, positions.dates[1:]):
        raise ValueError("returns and positions are not aligned on dates")
    days = np.flatnonzero(positions.defined[:-1]) + 1
    held = positions.positions[days - 1]
    r = returns.returns[days - 1]
    contrib = np.where(held == 0.0, 0.0, held * r)
    if np.any(np.isnan(contrib)):
        raise ValueError("a held position has no return (absent asset)")
    return PnlSeries(days, contrib.sum(axis=1), positions.name)


def std_pnl(pnl: np.ndarray, convention: str = "paper") -> float:
    """Volatility of daily PnL.

    ``paper`` divides the squared deviations from ``cumPnL / N`` by ``N - 1``
    (``N`` PnL values); ``textbook`` divides by ``N``.
    """
    pnl = np.asarray(pnl, dtype=float)
    n = len(pnl)
    dev = pnl - pnl.sum() / n
    if convention == "paper":
        return math.sqrt(float(dev @ dev) / (n - 1))
    if convention == "textbook":
        return math.sqrt(float(dev @ dev) / n)
    raise ValueError(f"std_convention must be 'paper' or 'textbook', got {convention!r}")


def alpha_stats(
    pnl: PnlSeries, turnover: TurnoverSeries, std_convention: str = "paper"
) -> AlphaStats:
    if len(pnl) < 3:
        raise ValueError(f"need at least 3 PnL values, got {len(pnl)}")
    cum = float(np.sum(pnl.pnl))
    std = std_pnl(pnl.pnl, std_convention)
    mean_tau = turnover.mean
    if std > 0:
        sharpe = math.sqrt(TRADING_DAYS) / len(pnl) * cum / std
        ratio = mean_tau / std
    else:
        sharpe = ratio = math.nan
    return AlphaStats(cum, sharpe, std, mean_tau, ratio)


# ---------------------------------------------------------------------------
# Covariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    matrix: np.ndarray
    kind: str = "covariance"

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.matrix))

    def correlation(self) -> "CovarianceMatrix":
        if self.kind == "correlation":
            return self
        std = self.std
        if np.any(std <= 0):
            raise ValueError("correlation undefined for a zero-variance alpha")
        corr = self.matrix / np.outer(std, std)
        np.fill_diagonal(corr, 1.0)
        return CovarianceMatrix(np.clip(corr, -1.0, 1.0), "correlation")


@dataclass(frozen=True, eq=False)
class RollingCovariance:
    """Covariance over trailing windows; ``matrices[j]`` ends at row ``end[j]``."""

    end: np.ndarray
    matrices: np.ndarray
    window: int


def align_pnls(pnls: Sequence[PnlSeries]) -> tuple[np.ndarray, np.ndarray]:
    """Stack PnL series on their common days: ``(days, [m, n] matrix)``."""
    days = pnls[0].days
    for s in pnls[1:]:
        days = np.intersect1d(days, s.days)
    cols = [s.pnl[np.searchsorted(s.days, days)] for s in pnls]
    return days, np.column_stack(cols)


def _as_matrix(data: Sequence[PnlSeries] | np.ndarray) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return np.asarray(data, dtype=float)
    return align_pnls(list(data))[1]


def sample_covariance(
    data: Sequence[PnlSeries] | np.ndarray, window: int | None = None
) -> CovarianceMatrix | RollingCovariance:
    """Unbiased sample covariance of alpha returns.

    ``data`` is a list of PnL series (aligned on common days) or an ``[m, n]``
    matrix of observations.  With ``window`` set, returns the rolling version.
    """
    x = _as_matrix(data)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("expected an [m, n] observation matrix")
    if window is not None:
        return rolling_covariance(x, window)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    dev = x - x.mean(axis=0)
    cov = dev.T @ dev / (x.shape[0] - 1)
    return CovarianceMatrix((cov + cov.T) / 2)


def rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing means ``[m - window + 1, ...]`` via running sums."""
    x = np.asarray(x, dtype=float)
    if window < 1 or x.shape[0] < window:
        raise ValueError(f"need at least {window} observations, got {x.shape[0]}")
    shift = x[:window].mean(axis=0)
    c = np.cumsum(x - shift, axis=0)
    c = np.concatenate([np.zeros((1,) + x.shape[1:]), c])
    return (c[window:] - c[:-window]) / window + shift


def rolling_covariance(x: np.ndarray, window: int) -> RollingCovariance:
    """Trailing-window covariance matrices updated by running sums.

    Each step adds the newest observation and drops the oldest; data are
    shifted by the first window's mean to limit cancellation.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[0]
    if window < 2:
        raise ValueError("window must be >= 2")
    if m < window:
        raise ValueError(f"insufficient history: {m} observations for window {window}")
    y = x - x[:window].mean(axis=0)
    s1 = np.concatenate([np.zeros((1, x.shape[1])), np.cumsum(y, axis=0)])
    outer = y[:, :, None] * y[:, None, :]
    s2 = np.concatenate([np.zeros((1,) + outer.shape[1:]), np.cumsum(outer, axis=0)])
    w1 = s1[window:] - s1[:-window]
    w2 = s2[window:] - s2[:-window]
    cov = (w2 - w1[:, :, None] * w1[:, None, :] / window) / (window - 1)
    cov = (cov + np.swapaxes(cov, 1, 2)) / 2
    return RollingCovariance(np.arange(window - 1, m), cov, window)


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def eigendecompose(
    c: CovarianceMatrix | np.ndarray, tol: float = 1e-13, max_sweeps: int = 100
) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps rotate away every off-diagonal entry until the largest one is at
    most ``tol * max|C|``.  Each eigenvector is signed so that its
    largest-magnitude entry is non-negative.
    """
    a = np.array(c.matrix if isinstance(c, CovarianceMatrix) else c, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(scale, 1e-300)):
        raise ValueError("matrix is not symmetric")
    a = (a + a.T) / 2
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * scale

    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a)))
        if n < 2 or off.max() <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= threshold * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                cs = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * cs
                colp, colq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cs * colp - sn * colq
                a[:, q] = sn * colp + cs * colq
                rowp, rowq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = cs * rowp - sn * rowq
                a[q, :] = sn * rowp + cs * rowq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = cs * vp - sn * vq
                v[:, q] = sn * vp + cs * vq
    else:
        raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps")

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values, v = values[order], v[:, order]
    for k in range(n):
        if v[np.argmax(np.abs(v[:, k])), k] < 0:
            v[:, k] = -v[:, k]
    return EigenDecomposition(values, v)


class DegenerateCovarianceError(ValueError):
    """Sample covariance is (numerically) singular.

    ``direction`` holds the near-null linear combination of the inputs.
    """

    def __init__(self, message: str, direction: np.ndarray):
        super().__init__(message)
        self.direction = direction


def whiten(
    data: Sequence[PnlSeries] | np.ndarray, rel_tol: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate and rescale observations to identity sample covariance.

    With ``C = H^T B H`` (rows of ``H`` are eigenvectors) the transform is
    ``B^{-1/2} H``; returns ``(whitened [m, n], transform [n, n])``.
    """
    x = _as_matrix(data)
    eig = eigendecompose(sample_covariance(x))
    top = eig.eigenvalues[0]
    if top <= 0 or eig.eigenvalues[-1] <= rel_tol * top:
        direction = eig.eigenvectors[:, -1]
        raise DegenerateCovarianceError(
            "covariance is degenerate: combination "
            f"{np.array2string(direction, precision=4)} is (nearly) constant",
            direction,
        )
    transform = eig.eigenvectors.T / np.sqrt(eig.eigenvalues)[:, None]
    return x @ transform.T, transform
