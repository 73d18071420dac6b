"""Prospect-spanning tests for nested portfolio sets.

Core pipeline: return panels -> utility-grid statistic with LP inner
problems -> subsampling inference with a bias-corrected critical value ->
rolling-window backtests and prospect-oriented performance measures.
"""

from .backtest import BacktestTrack, realized_return, run_backtest, weight_stats
from .eumax import (
    EuSolution,
    PortfolioSet,
    SolverError,
    grid_oracle,
    max_eu_concave,
    max_eu_convex,
)
from .inference import (
    SubsampleDistribution,
    TestDecision,
    bias_corrected_quantile,
    quantile,
    spanning_test,
    subsample_distribution,
)
from .mc import DgpSpec, RejectionSummary, simulate_rejection_rate
from .panel import (
    PanelError,
    ReturnPanel,
    SeriesStats,
    align,
    load_panel,
    summary_stats,
    window,
)
from .perf import (
    PerfReport,
    PerfSeries,
    downside_sharpe,
    net_of_cost_returns,
    opportunity_cost,
    perf_report,
    return_loss,
    up_ratio,
)
from .spanning import (
    GridOracleConfig,
    GridParams,
    SpanningResult,
    rho_definition,
    rho_star,
    super_efficiency_stat,
)
from .utility import (
    KnotGrid,
    PiecewiseUtility,
    UtilityFamily,
    build_family,
    build_knots,
    enumerate_weights,
    eval_utility,
    family_size,
)

__version__ = "0.1.0"

__all__ = [
    "BacktestTrack",
    "DgpSpec",
    "EuSolution",
    "GridOracleConfig",
    "GridParams",
    "KnotGrid",
    "PanelError",
    "PerfReport",
    "PerfSeries",
    "PiecewiseUtility",
    "PortfolioSet",
    "RejectionSummary",
    "ReturnPanel",
    "SeriesStats",
    "SolverError",
    "SpanningResult",
    "SubsampleDistribution",
    "TestDecision",
    "UtilityFamily",
    "align",
    "bias_corrected_quantile",
    "build_family",
    "build_knots",
    "downside_sharpe",
    "enumerate_weights",
    "eval_utility",
    "family_size",
    "grid_oracle",
    "load_panel",
    "max_eu_concave",
    "max_eu_convex",
    "net_of_cost_returns",
    "opportunity_cost",
    "perf_report",
    "quantile",
    "realized_return",
    "return_loss",
    "rho_definition",
    "rho_star",
    "run_backtest",
    "simulate_rejection_rate",
    "spanning_test",
    "subsample_distribution",
    "summary_stats",
    "super_efficiency_stat",
    "up_ratio",
    "weight_stats",
    "window",
]
