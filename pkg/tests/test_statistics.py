import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from crossturn.alphas import PositionPanel
from crossturn.market_data import ReturnsPanel
from crossturn.statistics import (
    CovarianceMatrix,
    DegenerateCovarianceError,
    PnlSeries,
    align_pnls,
    alpha_pnl,
    alpha_stats,
    eigendecompose,
    rolling_covariance,
    rolling_mean,
    sample_covariance,
    std_pnl,
    whiten,
)
from crossturn.turnover import TurnoverSeries
from helpers import position_panel


def returns_for(panel: PositionPanel, r):
    return ReturnsPanel(panel.dates[1:], np.asarray(r, float), panel.tickers)


# --- PnL and statistics ------------------------------------------------------


def test_pnl_hand_example():
    pos = position_panel([[0.5, -0.5], [0.0, 0.0]])
    pnl = alpha_pnl(pos, returns_for(pos, [[0.02, -0.02]]))
    assert pnl.days.tolist() == [1]
    assert pnl.pnl[0] == pytest.approx(0.02, abs=1e-17)


def test_pnl_zero_positions_and_market_move():
    pos = position_panel([[0.0, 0.0], [0.25, -0.25], [0.1, -0.1]])
    pnl = alpha_pnl(pos, returns_for(pos, [[0.3, -0.1], [0.05, 0.05]]))
    assert pnl.pnl.tolist() == [0.0, 0.0]


def test_pnl_skips_warmup_and_absent_zero_positions():
    pos = position_panel([[np.nan, np.nan], [1.0, 0.0], [0.0, 0.0]])
    pnl = alpha_pnl(pos, returns_for(pos, [[np.nan, np.nan], [0.1, np.nan]]))
    assert pnl.days.tolist() == [2]
    assert pnl.pnl[0] == pytest.approx(0.1)


def test_pnl_misaligned():
    pos = position_panel([[0.5, -0.5], [0.5, -0.5]])
    with pytest.raises(ValueError, match="shape"):
        alpha_pnl(pos, returns_for(pos, [[0.1, 0.1], [0.1, 0.1]]))


def literal_std(pnl):
    # brute-force k-2 / k-1 formula: k runs over days 2..K,
    # N = K - 1 PnL values, mean term cumPnL / N, divisor K - 2
    k_last = len(pnl) + 1
    mean = sum(pnl) / (k_last - 1)
    return math.sqrt(sum((v - mean) ** 2 for v in pnl) / (k_last - 2))


def test_std_conventions():
    x = np.array([0.01, -0.02, 0.03, 0.005, -0.001])
    assert std_pnl(x, "paper") == pytest.approx(literal_std(list(x)), rel=1e-14)
    assert std_pnl(x, "paper") == pytest.approx(np.std(x, ddof=1), rel=1e-14)
    assert std_pnl(x, "textbook") == pytest.approx(np.std(x, ddof=0), rel=1e-14)
    with pytest.raises(ValueError, match="std_convention"):
        std_pnl(x, "other")


def test_alternating_pnl_has_zero_sharpe():
    pnl = np.tile([0.01, -0.01], 126)
    stats = alpha_stats(PnlSeries(np.arange(1, 253), pnl), TurnoverSeries(np.arange(252), np.ones(252)))
    assert stats.cum_pnl == 0.0 and stats.sharpe == 0.0
    assert stats.ratio == pytest.approx(1 / np.std(pnl, ddof=1))


def test_constant_pnl_undefined_sharpe():
    stats = alpha_stats(PnlSeries(np.arange(5), np.full(5, 0.003)), TurnoverSeries(np.arange(5), np.ones(5)))
    assert stats.std_pnl == 0.0
    assert math.isnan(stats.sharpe) and math.isnan(stats.ratio)
    zero = alpha_stats(PnlSeries(np.arange(5), np.zeros(5)), TurnoverSeries(np.arange(5), np.ones(5)))
    assert zero.cum_pnl == 0.0 and math.isnan(zero.sharpe)


def test_sharpe_formula():
    pnl = np.array([0.01, 0.02, -0.005, 0.004])
    stats = alpha_stats(PnlSeries(np.arange(4), pnl), TurnoverSeries(np.arange(4), np.full(4, 0.3)))
    want = math.sqrt(252) / 4 * pnl.sum() / np.std(pnl, ddof=1)
    assert stats.sharpe == pytest.approx(want, rel=1e-14)
    assert list(stats.as_row()) == ["cumPnL", "sharpe", "T", "stdPnL", "T_over_std"]


def test_short_pnl_rejected():
    with pytest.raises(ValueError, match="at least 3"):
        alpha_stats(PnlSeries(np.arange(2), np.ones(2)), TurnoverSeries(np.arange(2), np.ones(2)))


@settings(max_examples=100, deadline=None)
@given(
    x=arrays(np.float64, st.integers(3, 40), elements=st.floats(-1, 1)),
    lam=st.one_of(st.just(0.0), st.floats(1e-6, 100), st.floats(-100, -1e-6)),
)
def test_std_homogeneous(x, lam):
    noise = 1e-13 * abs(lam) * (np.abs(x).max() + 1e-300)
    assert std_pnl(lam * x) == pytest.approx(abs(lam) * std_pnl(x), rel=1e-9, abs=noise)


@settings(max_examples=100, deadline=None)
@given(
    raw=arrays(np.float64, (4, 5), elements=st.floats(-1, 1)),
    r=arrays(np.float64, (3, 5), elements=st.floats(-0.5, 0.5)),
    shift=arrays(np.float64, 3, elements=st.floats(-0.5, 0.5)),
)
def test_market_shift_leaves_pnl(raw, r, shift):
    pos = raw - raw.mean(axis=1, keepdims=True)
    panel = position_panel(pos)
    a = alpha_pnl(panel, returns_for(panel, r)).pnl
    b = alpha_pnl(panel, returns_for(panel, r + shift[:, None])).pnl
    np.testing.assert_allclose(a, b, atol=1e-12)


# --- covariance ----------------------------------------------------------------


def brute_cov(x):
    m, n = x.shape
    mean = [sum(x[k, i] for k in range(m)) / m for i in range(n)]
    return np.array(
        [[sum((x[k, i] - mean[i]) * (x[k, j] - mean[j]) for k in range(m)) / (m - 1) for j in range(n)] for i in range(n)]
    )


def test_covariance_hand_fixture():
    x = np.array([[1.0, 2.0], [2.0, 1.0], [3.0, 4.0], [4.0, 3.0], [5.0, 6.0]])
    cov = sample_covariance(x).matrix
    np.testing.assert_allclose(cov, [[2.5, 2.5], [2.5, 3.7]], rtol=1e-15)
    np.testing.assert_allclose(cov, brute_cov(x), rtol=1e-14)


def test_identical_and_opposite_series():
    xi = np.array([0.1, -0.2, 0.05, 0.3])
    c = sample_covariance(np.column_stack([xi, xi]))
    assert c.correlation().matrix[0, 1] == 1.0
    assert eigendecompose(c).eigenvalues[1] == pytest.approx(0.0, abs=1e-15)
    assert sample_covariance(np.column_stack([xi, -xi])).correlation().matrix[0, 1] == -1.0


def test_covariance_from_pnl_series_aligns_days():
    a = PnlSeries(np.array([1, 2, 3, 4]), np.array([1.0, 2.0, 3.0, 5.0]))
    b = PnlSeries(np.array([2, 3, 4, 5]), np.array([2.0, 1.0, 7.0, 9.0]))
    days, mat = align_pnls([a, b])
    assert days.tolist() == [2, 3, 4]
    np.testing.assert_allclose(sample_covariance([a, b]).matrix, brute_cov(mat), rtol=1e-14)


def test_rolling_matches_batch(rng):
    x = rng.standard_normal((300, 4)) * [0.01, 0.02, 0.5, 3.0] + [0.001, 5.0, -2.0, 100.0]
    roll = sample_covariance(x, window=50)
    assert roll.end[0] == 49 and len(roll.end) == 251
    for j in (0, 10, 137, 250):
        end = roll.end[j]
        batch = np.cov(x[end - 49 : end + 1].T, ddof=1)
        np.testing.assert_allclose(roll.matrices[j], batch, rtol=0, atol=1e-10 * np.abs(batch).max())
    means = rolling_mean(x, 50)
    np.testing.assert_allclose(means[137], x[137:187].mean(axis=0), rtol=1e-12)


def test_rolling_insufficient_history(rng):
    with pytest.raises(ValueError, match="insufficient history"):
        rolling_covariance(rng.standard_normal((10, 2)), 20)


def test_congruence_identity(rng):
    x = rng.standard_normal((500, 4)) @ rng.standard_normal((4, 4))
    a = rng.standard_normal((3, 4))
    lhs = sample_covariance(x @ a.T).matrix
    rhs = a @ sample_covariance(x).matrix @ a.T
    np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-12)


# --- eigen decomposition ------------------------------------------------------------


def test_eigen_identity():
    eig = eigendecompose(np.eye(3))
    np.testing.assert_array_equal(eig.eigenvalues, [1, 1, 1])
    np.testing.assert_array_equal(eig.eigenvectors, np.eye(3))


def test_eigen_two_by_two_closed_form():
    eig = eigendecompose(CovarianceMatrix(np.array([[1.0, 0.5], [0.5, 1.0]])))
    np.testing.assert_allclose(eig.eigenvalues, [1.5, 0.5], atol=1e-15)
    r = 1 / math.sqrt(2)
    v = eig.eigenvectors
    np.testing.assert_allclose(v[:, 0], [r, r], atol=1e-15)
    # sign convention: largest-magnitude entry non-negative (first on ties)
    assert abs(v[0, 1]) == pytest.approx(r) and abs(v[1, 1]) == pytest.approx(r)
    assert v[0, 1] * v[1, 1] < 0


def test_eigen_rejects_nonsymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_eigen_against_reference(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    c = (a + a.T) * rng.uniform(1e-3, 1e3)
    eig = eigendecompose(c)
    scale = np.abs(c).max()
    assert np.abs(eig.reconstruct() - c).max() <= 1e-10 * scale
    assert np.abs(eig.eigenvectors.T @ eig.eigenvectors - np.eye(n)).max() <= 1e-10
    np.testing.assert_allclose(eig.eigenvalues, np.linalg.eigvalsh(c)[::-1], atol=1e-11 * scale)
    assert np.all(np.diff(eig.eigenvalues) <= 0)
    for k in range(n):
        col = eig.eigenvectors[:, k]
        assert col[np.argmax(np.abs(col))] >= 0


# --- whitening -----------------------------------------------------------------


def test_whiten_correlated_pair(rng):
    z = rng.standard_normal((2000, 2)) @ np.linalg.cholesky([[1, 0.9], [0.9, 1]]).T
    white, t = whiten(z)
    assert np.abs(sample_covariance(white).matrix - np.eye(2)).max() <= 1e-8
    c = sample_covariance(z).matrix
    np.testing.assert_allclose(t @ c @ t.T, np.eye(2), atol=1e-8)


def test_whiten_already_white_is_signed_permutation(rng):
    white, _ = whiten(rng.standard_normal((400, 3)) @ np.diag([1, 2, 3]))
    _, t = whiten(white)
    assert np.abs(np.abs(t) - np.round(np.abs(t))).max() <= 1e-8
    np.testing.assert_allclose(np.abs(t).sum(axis=0), 1.0, atol=1e-8)


def test_whiten_duplicate_reports_direction(rng):
    xi = rng.standard_normal(100)
    with pytest.raises(DegenerateCovarianceError) as err:
        whiten(np.column_stack([xi, xi, rng.standard_normal(100)]))
    d = err.value.direction
    assert abs(d[2]) < 1e-6
    np.testing.assert_allclose(np.abs(d[:2]), 1 / math.sqrt(2), atol=1e-6)
    assert d[0] * d[1] < 0
