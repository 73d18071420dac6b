"""Subsampling inference for the spanning statistic.

The statistic is recomputed on every contiguous block of length b (scaled by
sqrt(b)), the empirical (1 - alpha)-quantile is taken per block length, and
an OLS regression of the quantiles on 1/b extrapolated to b = T gives the
bias-corrected critical value. Spanning is rejected when the full-sample
statistic strictly exceeds it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from ._parallel import parallel_map
from .eumax import PortfolioSet
from .panel import ReturnPanel, window
from .spanning import GridParams, rho_star
from .utility import Mode, build_knots

DEFAULT_B_EXPONENTS = (0.6, 0.7, 0.8, 0.9)
MIN_BLOCK = 10


@dataclass(frozen=True)
class SubsampleDistribution:
    """Statistic values on all contiguous blocks of one length."""

    b: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.size < 1:
            raise ValueError("subsample distribution is empty")
        if vals.min() < 0.0:
            raise ValueError("subsample statistics must be nonnegative")
        vals.flags.writeable = False


@dataclass(frozen=True)
class TestDecision:
    """Full spanning-test outcome: statistic, critical value and verdict."""

    rho: float
    q_bc: float
    alpha: float
    quantiles_per_b: dict[int, float]
    gammas: tuple[float, float]
    decision: Literal["Spanning", "RejectSpanning"]


def block_lengths(t: int, exponents: Sequence[float] = DEFAULT_B_EXPONENTS) -> list[int]:
    """Deduplicated block lengths ceil(T^e), capped at T."""
    bs = sorted({min(t, math.ceil(t**e)) for e in exponents})
    return bs


def subsample_distribution(
    panel: ReturnPanel,
    bench: PortfolioSet,
    enlarged: PortfolioSet,
    b: int,
    grid: GridParams = GridParams(),
    mode: Mode = "paper",
    freeze_grids: bool = False,
    oracle_step: float = 0.02,
    jobs: int = 1,
) -> SubsampleDistribution:
    """Statistic on every contiguous block of length ``b``.

    Knot grids are rebuilt inside each block by default, because the
    statistic's definition includes its own range construction; set
    ``freeze_grids`` to reuse the full-sample grids for sensitivity analysis.
    """
    t = panel.n_periods
    if not 1 <= b <= t:
        raise ValueError(f"block length {b} outside 1..{t}")
    frozen = None
    if freeze_grids:
        frozen = (
            build_knots(panel, "negative", grid.n1),
            build_knots(panel, "positive", grid.p1),
        )

    def one(start: int) -> float:
        block = window(panel, start, b)
        return rho_star(
            block, bench, enlarged, grid, mode, oracle_step, knot_grids=frozen
        ).rho

    values = parallel_map(one, range(t - b + 1), jobs)
    return SubsampleDistribution(b, np.asarray(values))


def quantile(dist: SubsampleDistribution, level: float) -> float:
    """Lowest order statistic whose empirical cdf reaches ``level`` (no interpolation)."""
    if not 0.5 < level < 1.0:
        raise ValueError("level must be in (0.5, 1)")
    vals = np.sort(dist.values)
    idx = math.ceil(level * vals.size) - 1
    return float(vals[idx])


def bias_corrected_quantile(
    quantiles: Mapping[int, float], t: int
) -> tuple[float, float, float]:
    """OLS of the per-b quantiles on 1/b, extrapolated to b = T.

    Returns (q_bc, intercept, slope).
    """
    bs = sorted(quantiles)
    if len(bs) < 2:
        raise ValueError("need quantiles for at least 2 distinct block lengths")
    x = 1.0 / np.asarray(bs, dtype=float)
    y = np.asarray([quantiles[b] for b in bs], dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    g0, g1 = float(coef[0]), float(coef[1])
    return g0 + g1 / t, g0, g1


def spanning_test(
    panel: ReturnPanel,
    bench: PortfolioSet,
    enlarged: PortfolioSet,
    alpha: float = 0.05,
    b_exponents: Sequence[float] = DEFAULT_B_EXPONENTS,
    grid: GridParams = GridParams(),
    mode: Mode = "paper",
    freeze_grids: bool = False,
    oracle_step: float = 0.02,
    jobs: int = 1,
) -> TestDecision:
    """Full pipeline: statistic, per-b quantiles, bias correction, decision.

    The rejection rule is strict inequality, so an all-zero boundary case
    (statistic 0, critical value 0) reads as spanning.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must be in (0, 0.5)")
    t = panel.n_periods
    bs = block_lengths(t, b_exponents)
    if bs[0] < MIN_BLOCK:
        raise ValueError(
            f"smallest block length {bs[0]} below {MIN_BLOCK}; panel too short"
        )
    full = rho_star(panel, bench, enlarged, grid, mode, oracle_step)
    qs: dict[int, float] = {}
    for b in bs:
        dist = subsample_distribution(
            panel,
            bench,
            enlarged,
            b,
            grid,
            mode,
            freeze_grids=freeze_grids,
            oracle_step=oracle_step,
            jobs=jobs,
        )
        qs[b] = quantile(dist, 1.0 - alpha)
    q_bc, g0, g1 = bias_corrected_quantile(qs, t)
    decision = "RejectSpanning" if full.rho > q_bc else "Spanning"
    return TestDecision(full.rho, q_bc, alpha, qs, (g0, g1), decision)
