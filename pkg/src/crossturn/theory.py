"""Numerical checks of the covariance-model claims on sampled return vectors.

Functionals are callables on weight vectors ``x``: ``f(x)`` is the value of
the functional on the portfolio ``xi = samples @ x``.  That covers both the
standard deviation of a combination and the turnover of a combination of
real alphas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimators import AlphaSet, EstimatorInputs, kl_pairwise, theoretical
from .statistics import eigendecompose, sample_covariance, whiten

__all__ = [
    "AdmissibilityReport",
    "SpreadReport",
    "EquicorrelationComparison",
    "admissible_sample",
    "check_admissible",
    "std_functional",
    "turnover_functional",
    "verify_theorem_condition",
    "composition_rule",
    "proposition_counterexample",
    "step0_identity",
    "compare_equicorrelation",
    "run_theory_checks",
]

Functional = Callable[[np.ndarray], float]


def admissible_sample(
    seed: int, m: int, n: int, corr: float | np.ndarray = 0.0
) -> np.ndarray:
    """``[m, n]`` Gaussian draws with unit sample variance per column.

    ``corr`` is a common pairwise correlation or a full correlation matrix.
    """
    rng = np.random.default_rng(seed)
    target = np.asarray(corr, float)
    if target.ndim == 0:
        target = np.full((n, n), float(corr))
        np.fill_diagonal(target, 1.0)
    z = rng.standard_normal((m, n)) @ np.linalg.cholesky(target).T
    z -= z.mean(axis=0)
    return z / z.std(axis=0, ddof=1)


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    variance_ok: bool
    nondegenerate: bool
    variances: np.ndarray
    eigen_ratio: float
    direction: np.ndarray | None


def check_admissible(
    samples: np.ndarray, var_tol: float = 1e-8, eig_tol: float = 1e-10
) -> AdmissibilityReport:
    """Unit sample variances and a non-degenerate sample covariance.

    On degeneracy ``direction`` is the (unit) combination with the smallest
    variance.
    """
    x = np.asarray(samples, float)
    m, n = x.shape
    if m <= n:
        raise ValueError(f"need more observations than components, got {m} x {n}")
    cov = sample_covariance(x)
    variances = np.diag(cov.matrix).copy()
    variance_ok = bool(np.all(np.abs(variances - 1.0) <= var_tol))
    eig = eigendecompose(cov)
    top = eig.eigenvalues[0]
    ratio = float(eig.eigenvalues[-1] / top) if top > 0 else 0.0
    nondegenerate = ratio > eig_tol
    direction = None if nondegenerate else eig.eigenvectors[:, -1].copy()
    return AdmissibilityReport(
        variance_ok and nondegenerate, variance_ok, nondegenerate, variances, ratio, direction
    )


def std_functional(samples: np.ndarray, scale: float = 1.0) -> Functional:
    """``x -> scale * std(samples @ x)`` (unbiased)."""
    samples = np.asarray(samples, float)
    return lambda x: scale * float(np.std(samples @ np.asarray(x, float), ddof=1))


def turnover_functional(alpha_set: AlphaSet) -> Functional:
    """``x -> `` mean real turnover of the portfolio with weights ``x``."""
    return lambda x: float(alpha_set.real_turnover(x).mean())


@dataclass(frozen=True)
class SpreadReport:
    """``f(xi) / std(xi)`` over a grid of combinations."""

    ratios: np.ndarray
    directions: np.ndarray
    min: float
    max: float
    spread: float


def verify_theorem_condition(
    f: Functional, samples: np.ndarray, n_directions: int = 64, seed: int = 0
) -> SpreadReport:
    """Evaluate ``f(xi) / sqrt(D xi)`` on basis vectors and random unit combinations.

    A functional of the form ``f0 * std`` gives the constant ``f0`` (spread 1).
    The first ``n`` grid rows are the basis vectors.
    """
    x = np.asarray(samples, float)
    n = x.shape[1]
    rng = np.random.default_rng(seed)
    random = rng.standard_normal((n_directions, n))
    random /= np.linalg.norm(random, axis=1, keepdims=True)
    grid = np.vstack([np.eye(n), random])
    ratios = np.empty(len(grid))
    for k, w in enumerate(grid):
        sd = float(np.std(x @ w, ddof=1))
        if sd <= 0:
            raise ValueError(f"combination {w} is degenerate")
        ratios[k] = f(w) / sd
    lo, hi = float(ratios.min()), float(ratios.max())
    spread = hi / lo if lo > 0 else (1.0 if hi == lo else np.inf)
    return SpreadReport(ratios, grid, lo, hi, spread)


def composition_rule(f1: float, f2: float, rho: float) -> float:
    """Two-term rule ``(1+rho)/2 (f1+f2) + (1-rho)/2 |f1-f2|``."""
    rho = float(np.clip(rho, -1.0, 1.0))
    return (1 + rho) / 2 * (f1 + f2) + (1 - rho) / 2 * abs(f1 - f2)


def _corr(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    u, v = x @ a, x @ b
    u = u - u.mean()
    v = v - v.mean()
    den = np.sqrt((u @ u) * (v @ v))
    return float(u @ v / den) if den > 0 else 1.0


def proposition_counterexample(
    samples: np.ndarray, f: Functional | None = None, prewhiten: bool = True
) -> float:
    """Relative failure of the two-term rule along the proof chain.

    Predicts ``f(a1 + a2)`` and ``f(a1 - a2)`` from ``f(a1)``, ``f(a2)``,
    then ``f(2 a1)`` from those two predictions, and returns
    ``|f(2 a1) - predicted| / f(2 a1)``.  Components are reordered so that
    ``f(a1) >= f(a2)``.  For ``f = std`` on whitened draws this is 1/2.
    """
    x = np.asarray(samples, float)
    if prewhiten:
        x, _ = whiten(x)
    f = f or std_functional(x)
    n = x.shape[1]
    e1, e2 = np.eye(n)[0], np.eye(n)[1]
    if f(e1) < f(e2):
        e1, e2 = e2, e1
    f1, f2 = f(e1), f(e2)
    plus = composition_rule(f1, f2, _corr(x, e1, e2))
    minus = composition_rule(f1, f2, _corr(x, e1, -e2))
    predicted = composition_rule(plus, minus, _corr(x, e1 + e2, e1 - e2))
    actual = f(2 * e1)
    if actual == 0:
        return 0.0 if predicted == 0 else np.inf
    return abs(actual - predicted) / abs(actual)


def step0_identity(samples: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> tuple[float, float]:
    """Both sides of ``std(xi1 + xi2) = std(xi1) sqrt((C11 + 2 C12 + C22) / C11)``."""
    x = np.asarray(samples, float)
    pair = np.column_stack([x @ x1, x @ x2])
    c = sample_covariance(pair).matrix
    f = std_functional(x)
    lhs = f(np.asarray(x1) + np.asarray(x2))
    rhs = f(x1) * np.sqrt((c[0, 0] + 2 * c[0, 1] + c[1, 1]) / c[0, 0])
    return lhs, rhs


@dataclass(frozen=True)
class EquicorrelationComparison:
    prior: float
    theoretical: float
    explicit: float

    @property
    def consistent(self) -> bool:
        return abs(self.explicit - self.theoretical) <= 1e-12 * max(1.0, abs(self.theoretical))


def compare_equicorrelation(kappa: float, rho: float, n: int) -> EquicorrelationComparison:
    """Repeated two-term estimate ``kappa (rho + (1-rho)/n)`` vs ``kappa sqrt(rho + (1-rho)/n)``.

    ``explicit`` evaluates the square-root form through :func:`theoretical`
    on the ``n x n`` equicorrelation matrix with equal weights.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if n < 2:
        raise ValueError("n must be >= 2")
    base = rho + (1 - rho) / n
    c = np.full((n, n), rho)
    np.fill_diagonal(c, 1.0)
    explicit = theoretical(EstimatorInputs(np.full(n, 1.0 / n), np.full(n, kappa), c))
    return EquicorrelationComparison(kappa * base, kappa * np.sqrt(base), explicit)


def run_theory_checks(seed: int = 0, m: int = 100_000, n: int = 4) -> list[dict]:
    """Pass/fail rows for the computable consequences of the model."""
    rows = []

    def add(check, measured, expected, tol):
        rows.append(
            {
                "check": check,
                "measured": float(measured),
                "expected": float(expected),
                "tolerance": float(tol),
                "passed": bool(abs(measured - expected) <= tol),
            }
        )

    raw = admissible_sample(seed, m, n, corr=0.3)
    adm = check_admissible(raw)
    add("admissible_sample", float(adm.passed), 1.0, 0.0)

    white, _ = whiten(raw)
    dev = np.abs(sample_covariance(white).matrix - np.eye(n)).max()
    add("whitening_identity_maxdev", dev, 0.0, 1e-8)

    cov = sample_covariance(raw)
    eig = eigendecompose(cov)
    rec = np.abs(eig.reconstruct() - cov.matrix).max() / np.abs(cov.matrix).max()
    add("eigen_reconstruction_rel", rec, 0.0, 1e-10)

    spread = verify_theorem_condition(std_functional(raw), raw, seed=seed).spread
    add("std_ratio_spread", spread, 1.0, 1e-10)

    lhs, rhs = step0_identity(raw, np.eye(n)[0], np.eye(n)[1])
    add("step0_identity_gap", abs(lhs - rhs) / abs(lhs), 0.0, 1e-10)

    add("proposition_violation", proposition_counterexample(raw), 0.5, 0.02)

    cmp = compare_equicorrelation(1.0, 0.25, 4)
    add("equicorrelation_explicit_gap", abs(cmp.explicit - cmp.theoretical), 0.0, 1e-12)
    add("equicorrelation_prior_gap", cmp.theoretical - cmp.prior, np.sqrt(0.4375) - 0.4375, 1e-12)

    rng = np.random.default_rng(seed)
    grid = rng.uniform(0, 1, size=(1000, 4))
    gap = max(
        abs(
            kl_pairwise(t1, t2, x1, x2, 0.3)
            - (max(t1 * x1, t2 * x2) + 0.3 * min(t1 * x1, t2 * x2))
        )
        for t1, t2, x1, x2 in grid + 1e-3
    )
    add("kl_pair_closed_form_gap", gap, 0.0, 1e-12)
    return rows
