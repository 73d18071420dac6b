"""Rolling-window out-of-sample experiment.

Each month the spanning statistic is fitted on the trailing window; the
enlarged-set and benchmark-set portfolios attaining the maximizing utility's
suprema are carried into the next month, and their realized returns and
weights are tracked.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .eumax import PortfolioSet
from .panel import ReturnPanel, SeriesStats, summary_stats
from .panel import window as panel_window
from .spanning import GridParams, rho_star
from .utility import Mode


@dataclass(frozen=True)
class BacktestTrack:
    """Realized out-of-sample returns and weight paths of both portfolios."""

    dates: tuple[str, ...]
    universe: tuple[str, ...]
    r_factor: np.ndarray
    r_aug: np.ndarray
    w_factor: np.ndarray
    w_aug: np.ndarray

    def __post_init__(self):
        m = len(self.dates)
        for name in ("r_factor", "r_aug", "w_factor", "w_aug"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape[0] != m:
                raise ValueError(f"{name} length does not match dates")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        n = len(self.universe)
        if self.w_factor.shape != (m, n) or self.w_aug.shape != (m, n):
            raise ValueError("weight matrices must be (months x universe)")

    def __len__(self) -> int:
        return len(self.dates)


def realized_return(weights, next_returns) -> float:
    """Inner product of a simplex weight vector with next-month returns."""
    w = np.asarray(weights, dtype=float)
    r = np.asarray(next_returns, dtype=float)
    if w.shape != r.shape:
        raise ValueError("weights and returns have mismatched dimensions")
    return float(w @ r)


def run_backtest(
    panel: ReturnPanel,
    bench: PortfolioSet,
    enlarged: PortfolioSet,
    window: int = 300,
    grid: GridParams = GridParams(),
    mode: Mode = "paper",
    oracle_step: float = 0.02,
    jobs: int = 1,
) -> BacktestTrack:
    """Roll a fixed-length calibration window one month at a time.

    On a window with statistic 0 the enlarged universe adds nothing, so the
    augmented portfolio falls back to the benchmark optimum.
    """
    t = panel.n_periods
    if t < window + 1:
        raise ValueError(f"need at least window+1={window + 1} months, have {t}")
    if window < 2:
        raise ValueError("window must be >= 2")

    def one(m: int):
        block = panel_window(panel, m - window, window)
        res = rho_star(block, bench, enlarged, grid, mode, oracle_step)
        lam = res.kappa_star if res.rho == 0.0 else res.lambda_star
        kap = res.kappa_star
        nxt = panel.values[m]
        return (
            panel.dates[m],
            realized_return(kap, nxt),
            realized_return(lam, nxt),
            kap,
            lam,
        )

    rows = parallel_map(one, range(window, t), jobs)
    dates = tuple(r[0] for r in rows)
    return BacktestTrack(
        dates=dates,
        universe=panel.assets,
        r_factor=np.asarray([r[1] for r in rows]),
        r_aug=np.asarray([r[2] for r in rows]),
        w_factor=np.vstack([r[3] for r in rows]),
        w_aug=np.vstack([r[4] for r in rows]),
    )


def weight_stats(track: BacktestTrack, which: str = "aug") -> dict[str, SeriesStats]:
    """Descriptive statistics of each asset's weight path."""
    mats = {"aug": track.w_aug, "factor": track.w_factor}
    if which not in mats:
        raise ValueError("which must be 'aug' or 'factor'")
    mat = mats[which]
    return {
        asset: summary_stats(mat[:, j]) for j, asset in enumerate(track.universe)
    }


def track_to_csv(track: BacktestTrack, path) -> None:
    """Persist a track: date, realized returns, then both weight blocks."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = (
            ["date", "r_factor", "r_aug"]
            + [f"factor_w_{a}" for a in track.universe]
            + [f"aug_w_{a}" for a in track.universe]
        )
        writer.writerow(header)
        for i, date in enumerate(track.dates):
            row = [date, repr(float(track.r_factor[i])), repr(float(track.r_aug[i]))]
            row += [repr(float(v)) for v in track.w_factor[i]]
            row += [repr(float(v)) for v in track.w_aug[i]]
            writer.writerow(row)
