"""Covariance-based estimates of portfolio turnover under crossing of trades.

Estimator ids are stable strings used in reports: ``kl_pair``,
``kl_spectral``, ``theoretical``, ``t1`` .. ``t4`` and ``tmax``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .alphas import PositionPanel
from .statistics import (
    CovarianceMatrix,
    EigenDecomposition,
    alpha_pnl,
    eigendecompose,
    rolling_covariance,
    rolling_mean,
    sample_covariance,
)
from .market_data import ReturnsPanel
from .turnover import as_weights, moment_turnover

__all__ = [
    "ESTIMATOR_IDS",
    "RatioSpreadError",
    "EstimatorInputs",
    "EstimateSeries",
    "AlphaSet",
    "RollingInputs",
    "kl_pairwise",
    "kl_spectral",
    "spectral_eigensystem",
    "constant_ratio",
    "theoretical",
    "new_estimators",
    "build_alpha_set",
    "rolling_inputs",
    "estimate_series",
]

ESTIMATOR_IDS = ("kl_pair", "kl_spectral", "theoretical", "t1", "t2", "t3", "t4", "tmax")
RATIO_TOL = 1e-9


class RatioSpreadError(ValueError):
    """Turnover/std ratios differ, so no common kappa exists."""

    def __init__(self, ratios: np.ndarray):
        ratios = np.asarray(ratios, dtype=float)
        self.ratios = ratios
        self.spread = float(ratios.max() / ratios.min()) if ratios.min() > 0 else np.inf
        super().__init__(
            f"turnover/std ratios are not constant (max/min = {self.spread:.6g}); "
            "supply kappa explicitly"
        )


@dataclass(frozen=True, eq=False)
class EstimatorInputs:
    """Weights ``x``, alpha turnovers ``tau`` and returns covariance ``C``."""

    weights: np.ndarray
    taus: np.ndarray
    cov: np.ndarray
    kappa: float | None = None

    def __post_init__(self) -> None:
        x = as_weights(self.weights, allow_zero=True)
        taus = np.asarray(self.taus, dtype=float)
        cov = np.asarray(
            self.cov.matrix if isinstance(self.cov, CovarianceMatrix) else self.cov, dtype=float
        )
        n = x.size
        if taus.shape != (n,) or cov.shape != (n, n):
            raise ValueError(
                f"dimension mismatch: weights {n}, taus {taus.shape}, cov {cov.shape}"
            )
        object.__setattr__(self, "weights", x)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @property
    def sigma(self) -> float:
        x = self.weights
        return float(np.sqrt(max(x @ self.cov @ x, 0.0)))


def kl_pairwise(tau1, tau2, x1, x2, rho):
    """Two-alpha estimate ``(1+rho)/2 (a+b) + (1-rho)/2 |a-b|`` with ``a = tau1 x1``, ``b = tau2 x2``.

    Equal to ``max(a, b) + rho * min(a, b)``.  Accepts scalars or arrays.
    """
    x1, x2, rho = np.asarray(x1, float), np.asarray(x2, float), np.asarray(rho, float)
    if np.any(x1 <= 0) or np.any(x2 <= 0):
        raise ValueError("pairwise estimate requires positive weights")
    if np.any(np.abs(rho) > 1):
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
    a = np.asarray(tau1, float) * x1
    b = np.asarray(tau2, float) * x2
    out = (1 + rho) / 2 * (a + b) + (1 - rho) / 2 * np.abs(a - b)
    return float(out) if np.ndim(out) == 0 else out


def _spectral(taus: np.ndarray, weights: np.ndarray, eig: EigenDecomposition) -> np.ndarray:
    n = weights.size
    proj = (taus * np.abs(weights)) @ eig.eigenvectors
    return np.abs(proj) @ eig.eigenvalues / np.sqrt(n)


def spectral_eigensystem(c: CovarianceMatrix | np.ndarray) -> EigenDecomposition:
    """Eigensystem fed to the spectral estimate.

    Two alphas with equal variances always use the basis ``(1, 1)/sqrt 2``,
    ``(1, -1)/sqrt 2``.  It is the exact eigenbasis for every nonzero
    correlation and its continuous extension at zero correlation, where the
    spectrum is degenerate and a generic solver may return any rotation.
    """
    a = np.asarray(c.matrix if isinstance(c, CovarianceMatrix) else c, dtype=float)
    if a.shape == (2, 2) and a[0, 0] == a[1, 1] and a[0, 1] == a[1, 0]:
        r = 1.0 / np.sqrt(2.0)
        values = np.array([a[0, 0] + a[0, 1], a[0, 0] - a[0, 1]])
        vectors = np.array([[r, r], [r, -r]])
        if values[1] > values[0]:
            values, vectors = values[::-1], vectors[:, ::-1]
        return EigenDecomposition(values, vectors)
    return eigendecompose(a)


def kl_spectral(inputs: EstimatorInputs, eig: EigenDecomposition | None = None) -> float:
    """``n^{-1/2} sum_p psi_p |sum_i V_i^p tau_i |x_i||`` over the spectrum of ``C``."""
    if inputs.n < 2:
        raise ValueError("spectral estimate needs at least 2 alphas")
    eig = eig or spectral_eigensystem(inputs.cov)
    if eig.eigenvectors.shape != (inputs.n, inputs.n):
        raise ValueError("eigendecomposition does not match the number of alphas")
    return float(_spectral(inputs.taus, inputs.weights, eig))


def constant_ratio(taus: np.ndarray, std: np.ndarray, rtol: float = RATIO_TOL) -> float:
    """The common ratio ``tau_i / std_i``; raises :class:`RatioSpreadError` otherwise."""
    ratios = np.asarray(taus, float) / np.asarray(std, float)
    if np.any(~np.isfinite(ratios)) or ratios.min() <= 0 or ratios.max() > ratios.min() * (1 + rtol):
        if np.allclose(ratios, 0.0):
            return 0.0
        raise RatioSpreadError(ratios)
    return float(ratios.mean())


def theoretical(inputs: EstimatorInputs) -> float:
    """``kappa * sqrt(x^T C x)``; kappa is derived when not supplied."""
    kappa = inputs.kappa
    if kappa is None:
        kappa = constant_ratio(inputs.taus, inputs.std)
    return float(kappa * inputs.sigma)


def _new_estimates(
    taus: np.ndarray, std: np.ndarray, sigma: np.ndarray, weights: np.ndarray
) -> dict[str, np.ndarray]:
    """Vectorized T*1..T*4; ``taus``/``std`` are ``[..., n]``, ``sigma`` is ``[...]``."""
    if np.any(std <= 0):
        raise ValueError("std of every alpha must be positive")
    ratio = taus / std
    t1 = ratio.mean(axis=-1) * sigma
    with np.errstate(divide="ignore"):
        geo = np.where(
            np.any(ratio <= 0, axis=-1), 0.0, np.exp(np.log(np.abs(ratio)).mean(axis=-1))
        )
    t2 = geo * sigma
    wsum = weights.sum()
    t3 = (ratio @ weights) / wsum * sigma if wsum != 0 else np.full(np.shape(t1), np.nan)
    t4 = taus.sum(axis=-1) / std.sum(axis=-1) * sigma
    return {"t1": t1, "t2": t2, "t3": t3, "t4": t4}


def new_estimators(inputs: EstimatorInputs) -> dict[str, float]:
    """Arithmetic, geometric, weight-averaged and pooled kappa times ``sigma``.

    ``t3`` is NaN when the weights sum to zero; ``t2`` is 0 when some
    turnover is 0.
    """
    est = _new_estimates(inputs.taus, inputs.std, np.asarray(inputs.sigma), inputs.weights)
    return {k: float(v) for k, v in est.items()}


# ---------------------------------------------------------------------------
# Per-day series
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AlphaSet:
    """Backtest data of ``n`` alphas on their common days.

    ``days`` are 0-based panel days ``d`` on which every alpha has a PnL and
    a turnover (positions defined on ``d - 1`` and ``d``).  ``deltas[k, j]``
    is alpha ``k``'s position change on ``days[j]``.
    """

    names: tuple[str, ...]
    dates: np.ndarray
    days: np.ndarray
    pnl: np.ndarray
    tau: np.ndarray
    deltas: np.ndarray

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return len(self.days)

    def subset(self, idx: Sequence[int]) -> "AlphaSet":
        idx = list(idx)
        return AlphaSet(
            tuple(self.names[i] for i in idx),
            self.dates,
            self.days,
            self.pnl[:, idx],
            self.tau[:, idx],
            self.deltas[idx],
        )

    def real_turnover(self, weights: Sequence[float] | np.ndarray) -> np.ndarray:
        """Exact daily turnover of ``sum_k x_k a_k`` with crossing of trades."""
        x = as_weights(weights, allow_zero=True)
        if x.size != self.n:
            raise ValueError(f"{x.size} weights for {self.n} alphas")
        trade = np.zeros(self.deltas.shape[1:])
        for w, delta in zip(x, self.deltas):
            trade += w * delta
        return np.abs(trade).sum(axis=-1)

    def max_turnover(self, weights: Sequence[float] | np.ndarray) -> np.ndarray:
        """``sum_k |x_k| tau_k`` per day.

        Accumulated asset by asset in the same order as :meth:`real_turnover`,
        so that rounding can never push the real turnover above this bound.
        """
        x = as_weights(weights, allow_zero=True)
        if x.size != self.n:
            raise ValueError(f"{x.size} weights for {self.n} alphas")
        bound = np.zeros(self.deltas.shape[1:])
        for w, delta in zip(x, self.deltas):
            bound += np.abs(w * delta)
        return bound.sum(axis=-1)


def build_alpha_set(
    panels: Sequence[PositionPanel],
    returns: ReturnsPanel,
    start: str | np.datetime64 | None = None,
    end: str | np.datetime64 | None = None,
) -> AlphaSet:
    """Collect PnL, turnover and position changes on the alphas' common days."""
    if not panels:
        raise ValueError("need at least one alpha")
    dates = panels[0].dates
    keep = np.ones(len(dates), dtype=bool)
    keep[0] = False
    if start is not None:
        keep &= dates >= np.datetime64(start, "D")
    if end is not None:
        keep &= dates <= np.datetime64(end, "D")
    pnls, turnovers = [], []
    for panel in panels:
        if not np.array_equal(panel.dates, dates) or panel.tickers != panels[0].tickers:
            raise ValueError(f"alpha {panel.name!r} is not aligned with the others")
        pnls.append(alpha_pnl(panel, returns))
        turnovers.append(moment_turnover(panel))
        keep[1:] &= panel.defined[1:] & panel.defined[:-1]
    days = np.flatnonzero(keep)
    if days.size < 3:
        raise ValueError(f"alphas share only {days.size} usable days")
    pnl = np.column_stack([s.pnl[np.searchsorted(s.days, days)] for s in pnls])
    tau = np.column_stack([t.tau[np.searchsorted(t.days, days)] for t in turnovers])
    deltas = np.stack([pnl_.positions[days] - pnl_.positions[days - 1] for pnl_ in panels])
    names = tuple(pn.name or f"alpha{k + 1}" for k, pn in enumerate(panels))
    return AlphaSet(names, dates, days, pnl, tau, deltas)


@dataclass(frozen=True, eq=False)
class RollingInputs:
    """Rolling mean turnovers and covariances plus the full-period matrix.

    Row ``j`` of the rolling arrays covers alpha-set rows
    ``j .. j + window - 1`` and is attributed to the last of them.
    """

    window: int
    tau_bar: np.ndarray
    cov: np.ndarray
    full_cov: CovarianceMatrix

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.einsum("jii->ji", self.cov))


def rolling_inputs(alpha_set: AlphaSet, window: int = 250) -> RollingInputs:
    if alpha_set.m < window:
        raise ValueError(
            f"insufficient history: {alpha_set.m} common days for a {window}-day window"
        )
    roll = rolling_covariance(alpha_set.pnl, window)
    return RollingInputs(
        window,
        rolling_mean(alpha_set.tau, window),
        roll.matrices,
        sample_covariance(alpha_set.pnl),
    )


@dataclass(frozen=True, eq=False)
class EstimateSeries:
    """Estimator values, real and no-crossing turnover on ``days``."""

    days: np.ndarray
    dates: np.ndarray
    real: np.ndarray
    values: dict[str, np.ndarray]

    @property
    def tmax(self) -> np.ndarray:
        return self.values["tmax"]

    @property
    def kl_id(self) -> str:
        return "kl_pair" if "kl_pair" in self.values else "kl_spectral"


def estimate_series(
    alpha_set: AlphaSet,
    weights: Sequence[float] | np.ndarray,
    window: int = 250,
    *,
    kl: str = "auto",
    spectral_matrix: str = "correlation",
    kappa: float | None = None,
    rolling: RollingInputs | None = None,
) -> EstimateSeries:
    """Per-day turnover estimates for the portfolio with ``weights``.

    T*1..T*4 use rolling-window mean turnovers and covariance.  The KL
    estimate uses the same rolling mean turnovers with the full-period
    matrix; ``kl="auto"`` picks the pairwise form for two alphas and the
    spectral form otherwise.  ``tmax`` uses same-day alpha turnovers.
    ``theoretical`` is included only when ``kappa`` is given.
    """
    x = as_weights(weights)
    if x.size != alpha_set.n:
        raise ValueError(f"{x.size} weights for {alpha_set.n} alphas")
    rolling = rolling or rolling_inputs(alpha_set, window)
    if rolling.window != window:
        raise ValueError("cached rolling inputs use a different window")

    tail = slice(window - 1, None)
    cov = rolling.cov
    sigma = np.sqrt(np.maximum(np.einsum("i,jik,k->j", x, cov, x), 0.0))
    values: dict[str, np.ndarray] = {}

    if kl == "auto":
        kl = "pair" if alpha_set.n == 2 else "spectral"
    if kl == "pair":
        if alpha_set.n != 2:
            raise ValueError("pairwise KL estimate needs exactly 2 alphas")
        rho = rolling.full_cov.correlation().matrix[0, 1]
        values["kl_pair"] = kl_pairwise(
            rolling.tau_bar[:, 0], rolling.tau_bar[:, 1], x[0], x[1], rho
        )
    elif kl == "spectral":
        if spectral_matrix == "correlation":
            matrix = rolling.full_cov.correlation()
        elif spectral_matrix == "covariance":
            matrix = rolling.full_cov
        else:
            raise ValueError(f"spectral_matrix must be covariance or correlation, got {spectral_matrix!r}")
        values["kl_spectral"] = _spectral(rolling.tau_bar, x, spectral_eigensystem(matrix))
    elif kl != "none":
        raise ValueError(f"kl must be auto, pair, spectral or none, got {kl!r}")

    if kappa is not None:
        values["theoretical"] = kappa * sigma
    values.update(_new_estimates(rolling.tau_bar, rolling.std, sigma, x))
    real = alpha_set.real_turnover(x)[tail]
    values["tmax"] = alpha_set.max_turnover(x)[tail]
    days = alpha_set.days[tail]
    return EstimateSeries(days, alpha_set.dates[days], real, values)
