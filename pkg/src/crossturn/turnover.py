"""Portfolio positions with crossing of trades, and exact turnover.

Combining alphas sums their position vectors asset by asset, so sign-opposite
trades on the same asset cross.  Positions are not renormalized after
combination: turnover is reported in raw book units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .alphas import PositionPanel

__all__ = [
    "TurnoverSeries",
    "as_weights",
    "combine_positions",
    "moment_turnover",
    "max_turnover",
]


@dataclass(frozen=True, eq=False)
class TurnoverSeries:
    """Daily turnover ``tau[j]`` on 0-based panel days ``days[j]``."""

    days: np.ndarray
    tau: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.tau))

    def __len__(self) -> int:
        return len(self.tau)


def as_weights(x: Sequence[float] | np.ndarray, allow_zero: bool = False) -> np.ndarray:
    """Validate portfolio weights: finite and, unless allowed, not all zero."""
    w = np.asarray(x, dtype=float).ravel()
    if w.size == 0:
        raise ValueError("weights must be non-empty")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"weights must be finite, got {w}")
    if not allow_zero and not np.any(w):
        raise ValueError("weights must not all be zero")
    return w


def combine_positions(
    panels: Sequence[PositionPanel], weights: Sequence[float] | np.ndarray
) -> PositionPanel:
    """Portfolio positions ``sum_k x_k a_k(d)`` on days where every alpha is defined."""
    x = as_weights(weights, allow_zero=True)
    if len(panels) == 0:
        raise ValueError("need at least one alpha")
    if len(panels) != x.size:
        raise ValueError(f"{len(panels)} panels but {x.size} weights")
    first = panels[0]
    for pnl in panels[1:]:
        if pnl.positions.shape != first.positions.shape:
            raise ValueError("alpha panels have mismatched shapes")
        if pnl.tickers != first.tickers or not np.array_equal(pnl.dates, first.dates):
            raise ValueError("alpha panels have different dates or assets")
    defined = np.logical_and.reduce([pnl.defined for pnl in panels])
    if not defined.any():
        raise ValueError("alphas share no defined day")
    # elementwise accumulation (not BLAS) so that x a - x a cancels exactly
    combined = np.zeros(first.positions.shape)
    for w, pnl in zip(x, panels):
        combined += w * np.nan_to_num(pnl.positions)
    combined[~defined] = np.nan
    return PositionPanel(first.dates, first.tickers, combined, defined, name="portfolio")


def moment_turnover(panel: PositionPanel) -> TurnoverSeries:
    """``tau(d) = sum_i |a_i(d) - a_i(d-1)|`` for each pair of defined consecutive days."""
    both = panel.defined[1:] & panel.defined[:-1]
    if not both.any():
        raise ValueError(f"{panel.name or 'panel'}: fewer than 2 consecutive defined days")
    days = np.flatnonzero(both) + 1
    pos = panel.positions
    tau = np.abs(pos[days] - pos[days - 1]).sum(axis=1)
    return TurnoverSeries(days, tau)


def max_turnover(
    alpha_turnovers: Sequence[float] | np.ndarray, weights: Sequence[float] | np.ndarray
) -> np.ndarray | float:
    """Turnover without crossing: ``sum_k |x_k| tau_k``.

    ``alpha_turnovers`` is ``[n]`` (scalar result) or ``[days, n]`` (per day).
    """
    tau = np.asarray(alpha_turnovers, dtype=float)
    x = as_weights(weights, allow_zero=True)
    if tau.shape[-1] != x.size:
        raise ValueError(f"{tau.shape[-1]} turnovers but {x.size} weights")
    out = tau @ np.abs(x)
    return float(out) if np.ndim(out) == 0 else out
