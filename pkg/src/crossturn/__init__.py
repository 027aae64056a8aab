"""Portfolio turnover of combined trading strategies under crossing of trades."""

from .alphas import PositionPanel, builtin_alphas, evaluate_alpha, parse, rsi
from .estimators import (
    AlphaSet,
    EstimateSeries,
    EstimatorInputs,
    build_alpha_set,
    estimate_series,
    kl_pairwise,
    kl_spectral,
    new_estimators,
    theoretical,
)
from .experiments import (
    MetricsRow,
    SobolSampler,
    metrics,
    ratio_spread,
    run_pairs_experiment,
    run_sobol_experiment,
)
from .market_data import (
    OhlcvPanel,
    ReturnsPanel,
    SyntheticSpec,
    compute_returns,
    generate_synthetic,
    load_panel,
    write_panel,
)
from .statistics import (
    AlphaStats,
    CovarianceMatrix,
    EigenDecomposition,
    PnlSeries,
    alpha_pnl,
    alpha_stats,
    eigendecompose,
    sample_covariance,
    whiten,
)
from .turnover import TurnoverSeries, combine_positions, max_turnover, moment_turnover

__version__ = "0.1.0"
