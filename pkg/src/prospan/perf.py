"""Performance measures comparing benchmark-only and augmented return series.

Undefined measures (e.g. downside risk of an all-gain series) are reported as
NaN rather than raising, so a report can always be assembled.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .backtest import BacktestTrack

DEFAULT_TRC = 0.0035
DEFAULT_LOSS_AVERSION = 2.25
DEFAULT_CURVATURES = (0.2, 0.4, 0.6)


@dataclass(frozen=True)
class PerfSeries:
    """Per-series block of the report."""

    mean: float
    sd: float
    sharpe: float
    downside_sharpe: float
    up_ratio: float


@dataclass(frozen=True)
class PerfReport:
    factor: PerfSeries
    augmented: PerfSeries
    return_loss: float
    opportunity_cost: dict[tuple[float, float], float]


def downside_sharpe(returns, rf_mean: float = 0.0) -> float:
    """Mean excess return over sqrt(2) times the downside deviation.

    Downside variance sums squared losses below a zero benchmark with
    denominator T - 1; NaN when the series has no strictly negative return.
    """
    x = np.asarray(returns, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 returns")
    losses = np.minimum(x, 0.0)
    var_down = float((losses**2).sum()) / (x.size - 1)
    if var_down == 0.0:
        return float("nan")
    return (float(x.mean()) - rf_mean) / (math.sqrt(2.0) * math.sqrt(var_down))


def up_ratio(returns, benchmark) -> float:
    """Average excess over a benchmark divided by root-mean-square shortfall."""
    r = np.asarray(returns, dtype=float)
    rho = np.asarray(benchmark, dtype=float)
    if rho.ndim == 0:
        rho = np.full_like(r, float(rho))
    if r.shape != rho.shape:
        raise ValueError("returns and benchmark have mismatched lengths")
    upside = np.maximum(0.0, r - rho).mean()
    shortfall = math.sqrt(float((np.maximum(0.0, rho - r) ** 2).mean()))
    if shortfall == 0.0:
        return float("nan")
    return float(upside) / shortfall


def s_shaped_utility(x, alpha: float, beta: float, gamma: float = DEFAULT_LOSS_AVERSION):
    """Two-branch power utility: x^alpha on gains, -gamma*(-x)^beta on losses."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, np.abs(x) ** alpha, -gamma * np.abs(x) ** beta)
    return float(out) if out.ndim == 0 else out


def opportunity_cost(
    r_factor,
    r_aug,
    alpha: float,
    beta: float,
    gamma: float = DEFAULT_LOSS_AVERSION,
    tol: float = 1e-10,
) -> float:
    """Certain return added to the benchmark series to equate expected utilities.

    Solves E[U(1 + r_factor + theta)] = E[U(1 + r_aug)] by bisection; the map
    is strictly increasing in theta because U is strictly increasing.
    """
    if not (0.0 < alpha <= 1.0 and 0.0 < beta <= 1.0):
        raise ValueError("alpha and beta must be in (0, 1]")
    rf = np.asarray(r_factor, dtype=float)
    ra = np.asarray(r_aug, dtype=float)
    if rf.shape != ra.shape:
        raise ValueError("series have mismatched lengths")
    target = float(np.mean(s_shaped_utility(1.0 + ra, alpha, beta, gamma)))

    def excess(theta: float) -> float:
        return (
            float(np.mean(s_shaped_utility(1.0 + rf + theta, alpha, beta, gamma)))
            - target
        )

    lo = float(ra.min() - rf.max())
    hi = float(ra.max() - rf.min())
    if lo == hi:
        return lo
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo > 0.0 or f_hi < 0.0:
        pad = 1e-12 * (1.0 + abs(lo) + abs(hi))
        lo, hi = lo - pad, hi + pad
        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo > 0.0 or f_hi < 0.0:
            raise ValueError("bisection bracket failed for the given series")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def net_of_cost_returns(
    returns,
    weights,
    trc: float = DEFAULT_TRC,
    first_month_free: bool = False,
) -> np.ndarray:
    """Returns net of proportional transaction costs on monthly turnover.

    Wealth compounds as NW_{t+1} = NW_t * (1 + R_{t+1}) * (1 - trc * turnover),
    with turnover the l1 change in weights. The first month is charged against
    an all-zero prior position unless ``first_month_free``.
    """
    if trc < 0.0:
        raise ValueError("trc must be nonnegative")
    r = np.asarray(returns, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != r.size:
        raise ValueError("weights must be (months x assets) aligned with returns")
    prev = np.vstack([w[0] if first_month_free else np.zeros(w.shape[1]), w[:-1]])
    turnover = np.abs(w - prev).sum(axis=1)
    return (1.0 + r) * (1.0 - trc * turnover) - 1.0


def return_loss(net_factor, net_aug) -> float:
    """Extra mean return the benchmark needs to match the augmented risk-adjusted return."""
    f = np.asarray(net_factor, dtype=float)
    a = np.asarray(net_aug, dtype=float)
    sd_aug = float(np.std(a, ddof=1))
    if sd_aug == 0.0:
        raise ValueError("augmented series has zero standard deviation")
    sd_f = float(np.std(f, ddof=1))
    return float(a.mean()) / sd_aug * sd_f - float(f.mean())


def _series_block(returns: np.ndarray, rf: np.ndarray) -> PerfSeries:
    mean = float(returns.mean())
    sd = float(np.std(returns, ddof=1))
    rf_mean = float(rf.mean())
    sharpe = (mean - rf_mean) / sd if sd > 0.0 else float("nan")
    return PerfSeries(
        mean=mean,
        sd=sd,
        sharpe=sharpe,
        downside_sharpe=downside_sharpe(returns, rf_mean),
        up_ratio=up_ratio(returns, rf),
    )


def perf_report(
    track: BacktestTrack,
    rf=None,
    alphas=DEFAULT_CURVATURES,
    trc: float = DEFAULT_TRC,
    gamma: float = DEFAULT_LOSS_AVERSION,
    first_month_free: bool = False,
) -> PerfReport:
    """Assemble every measure for a backtest track.

    Sharpe-style ratios and the UP ratio benchmark against the supplied
    risk-free series (zero when absent); the return loss uses net-of-cost
    series while opportunity costs use gross returns with alpha = beta.
    """
    m = len(track)
    rf_arr = np.zeros(m) if rf is None else np.asarray(rf, dtype=float)
    if rf_arr.shape != (m,):
        raise ValueError("risk-free series length does not match the track")
    net_f = net_of_cost_returns(
        track.r_factor, track.w_factor, trc, first_month_free
    )
    net_a = net_of_cost_returns(track.r_aug, track.w_aug, trc, first_month_free)
    costs = {
        (a, a): opportunity_cost(track.r_factor, track.r_aug, a, a, gamma)
        for a in alphas
    }
    return PerfReport(
        factor=_series_block(track.r_factor, rf_arr),
        augmented=_series_block(track.r_aug, rf_arr),
        return_loss=return_loss(net_f, net_a),
        opportunity_cost=costs,
    )


def perf_report_to_csv(report: PerfReport, path) -> None:
    """Two-column table: one row per measure, factor then augmented."""

    def fmt(v: float) -> str:
        return "" if math.isnan(v) else repr(float(v))

    rows = [
        ("Mean", report.factor.mean, report.augmented.mean),
        ("SD", report.factor.sd, report.augmented.sd),
        ("Sharpe ratio", report.factor.sharpe, report.augmented.sharpe),
        (
            "Downside Sharpe ratio",
            report.factor.downside_sharpe,
            report.augmented.downside_sharpe,
        ),
        ("UP ratio", report.factor.up_ratio, report.augmented.up_ratio),
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["measure", "factor", "augmented"])
        for name, f, a in rows:
            writer.writerow([name, fmt(f), fmt(a)])
        writer.writerow(["Return Loss", "", fmt(report.return_loss)])
        for (a, b), theta in sorted(report.opportunity_cost.items()):
            writer.writerow([f"Opportunity Cost a={a} b={b}", "", fmt(theta)])
