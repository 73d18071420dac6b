"""Spanning test statistic over finite utility families.

The statistic scans every utility branch on both sides, takes the gap between
the best expected utility achievable in the enlarged set and in the benchmark
set, and scales the largest gap by sqrt(T). A definition-based saddle
statistic over ramp functions and simplex grids serves as a small-instance
oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .eumax import (
    PortfolioSet,
    concave_pieces,
    concave_sup_lp,
    concave_sup_small,
    convex_vertex_values,
    simplex_grid,
)
from .panel import ReturnPanel
from .utility import (
    DEFAULT_WEIGHT_CAP,
    Mode,
    UtilityFamily,
    build_family,
    build_knots,
    family_from_grid,
)

GRID_SOLVER_MAX_ASSETS = 4
ORACLE_MAX_ASSETS = 3


@dataclass(frozen=True)
class SpanningResult:
    """Outcome of the spanning statistic on one panel.

    ``per_utility`` stacks the unscaled sup-differences for the negative
    family followed by the positive family; ``utility_index`` is the index of
    the maximizer within its own family.
    """

    rho: float
    side: Literal["negative", "positive"]
    utility_index: int
    lambda_star: np.ndarray
    kappa_star: np.ndarray
    per_utility: np.ndarray
    n_negative: int
    n_positive: int

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "side": self.side,
            "utility_index": self.utility_index,
            "lambda_star": [float(v) for v in self.lambda_star],
            "kappa_star": [float(v) for v in self.kappa_star],
            "per_utility": [float(v) for v in self.per_utility],
        }


@dataclass(frozen=True)
class GridOracleConfig:
    """Resolution of the definition-based oracle statistic."""

    z_count: int = 10
    lambda_step: float = 0.02

    def __post_init__(self):
        if self.z_count < 2:
            raise ValueError("z_count must be >= 2")
        if not 0.0 < self.lambda_step <= 1.0:
            raise ValueError("lambda_step must be in (0, 1]")


@dataclass(frozen=True)
class GridParams:
    """Knot and weight-level counts for the two utility families."""

    n1: int = 10
    n2: int = 5
    p1: int = 10
    p2: int = 5
    weight_cap: int = field(default=DEFAULT_WEIGHT_CAP, compare=False)

    def __post_init__(self):
        if min(self.n1, self.n2, self.p1, self.p2) < 2:
            raise ValueError("grid parameters must all be >= 2")


def _effective_key(ycols: np.ndarray) -> bytes:
    """Canonical byte key of a face's distinct return columns.

    Two faces with the same distinct columns span identical sets of portfolio
    return distributions, so every inner supremum coincides exactly.
    """
    cols = np.unique(np.ascontiguousarray(ycols.T), axis=0)
    return cols.tobytes()


def _ramp_scores(
    u_matrix: np.ndarray, family: UtilityFamily, mode: Mode
) -> np.ndarray:
    """Expected utility of each portfolio-return row under every member.

    The per-knot ramp means are reduced over dates before mixing with the
    weight matrix, the same order of operations as the exact solvers, so
    identical return series produce bit-identical scores on every path.
    """
    z = family.grid.array()
    if family.side == "negative":
        arg = np.minimum(u_matrix, 0.0) if mode == "clamped" else u_matrix
        per_knot = np.maximum(arg[:, :, None], z).mean(axis=1)
    else:
        arg = np.maximum(u_matrix, 0.0) if mode == "clamped" else u_matrix
        per_knot = np.minimum(arg[:, :, None], z).mean(axis=1)
    return per_knot @ family.weights.T


def _sup_values(
    ycols: np.ndarray,
    family: UtilityFamily,
    mode: Mode,
    oracle_step: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-member suprema of expected utility over one face.

    Returns (values, local_weights). Paper mode uses the exact solvers
    (vertex enumeration on the loss side, kink scan or LP on the gain side);
    clamped mode falls back to a simplex-grid search, which restricts the
    face size.
    """
    n_local = ycols.shape[1]
    if mode == "clamped":
        if n_local > GRID_SOLVER_MAX_ASSETS:
            raise ValueError(
                "clamped mode uses a grid solver and is limited to faces "
                f"with at most {GRID_SOLVER_MAX_ASSETS} assets"
            )
        divisions = max(1, round(1.0 / oracle_step))
        grid = simplex_grid(n_local, divisions)
        scores = _ramp_scores(grid @ ycols.T, family, "clamped")
        best = np.argmax(scores, axis=0)
        values = scores[best, np.arange(len(family))]
        return values, grid[best]
    if family.side == "negative":
        vals = convex_vertex_values(ycols, family)
        best = np.argmax(vals, axis=0)
        values = vals[best, np.arange(len(family))]
        weights = np.zeros((len(family), n_local))
        weights[np.arange(len(family)), best] = 1.0
        return values, weights
    if n_local <= 2:
        return concave_sup_small(ycols, family)
    values = np.empty(len(family))
    weights = np.empty((len(family), n_local))
    knots = family.grid.array()
    wmat = family.weights
    for i in range(len(family)):
        member = family.member(i)
        values[i], weights[i] = concave_sup_lp(
            ycols, knots, wmat[i], concave_pieces(member)
        )
    return values, weights


def _fixed_values(u_series: np.ndarray, family: UtilityFamily, mode: Mode) -> np.ndarray:
    """Expected utility of a fixed portfolio return series for every member."""
    return _ramp_scores(u_series[None, :], family, mode)[0]


def _validate_nested(panel: ReturnPanel, inner: PortfolioSet, outer: PortfolioSet):
    if tuple(outer.universe) != tuple(panel.assets):
        raise ValueError("portfolio set universe does not match the panel")
    if not inner.is_subset_of(outer):
        raise ValueError("benchmark set must be a subset of the enlarged set")


def rho_star(
    panel: ReturnPanel,
    bench: PortfolioSet,
    enlarged: PortfolioSet,
    grid: GridParams = GridParams(),
    mode: Mode = "paper",
    oracle_step: float = 0.02,
    knot_grids=None,
) -> SpanningResult:
    """Spanning statistic: sqrt(T) times the largest sup-difference.

    For every branch in both families the difference between the enlarged-set
    and benchmark-set suprema is computed (clamped at 0, where it lies by
    nestedness); the maximizer is reported with a deterministic tie-break:
    negative family first, then lowest member index. ``knot_grids`` overrides
    the panel-derived knot grids (used by frozen-grid subsampling).
    """
    _validate_nested(panel, bench, enlarged)
    t = panel.n_periods
    cols_l = panel.values[:, list(enlarged.allowed)]
    cols_k = panel.values[:, list(bench.allowed)]
    if knot_grids is None:
        neg_grid = build_knots(panel, "negative", grid.n1)
        pos_grid = build_knots(panel, "positive", grid.p1)
    else:
        neg_grid, pos_grid = knot_grids
    families = {
        "negative": family_from_grid(neg_grid, grid.n2, cap=grid.weight_cap),
        "positive": family_from_grid(pos_grid, grid.p2, cap=grid.weight_cap),
    }
    n_members = {side: len(fam) for side, fam in families.items()}

    if _effective_key(cols_k) == _effective_key(cols_l):
        # identical opportunity sets: every difference vanishes identically
        side = "negative" if not neg_grid.degenerate else "positive"
        fam = families[side]
        vals_k, w_k = _sup_values(cols_k, fam, mode, oracle_step)
        kappa = _expand(panel.n_assets, bench.allowed, w_k[0])
        return SpanningResult(
            rho=0.0,
            side=side,
            utility_index=0,
            lambda_star=kappa,
            kappa_star=kappa,
            per_utility=np.zeros(n_members["negative"] + n_members["positive"]),
            n_negative=n_members["negative"],
            n_positive=n_members["positive"],
        )

    per_side: dict[str, np.ndarray] = {}
    weights_side: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for side, fam in families.items():
        if fam.grid.degenerate:
            per_side[side] = np.zeros(len(fam))
            weights_side[side] = (None, None)
            continue
        vals_l, w_l = _sup_values(cols_l, fam, mode, oracle_step)
        vals_k, w_k = _sup_values(cols_k, fam, mode, oracle_step)
        per_side[side] = np.maximum(vals_l - vals_k, 0.0)
        weights_side[side] = (w_l, w_k)

    diffs = np.concatenate([per_side["negative"], per_side["positive"]])
    flat_best = int(np.argmax(diffs))
    if flat_best < n_members["negative"]:
        side, idx = "negative", flat_best
    else:
        side, idx = "positive", flat_best - n_members["negative"]
    w_l, w_k = weights_side[side]
    if w_l is None:
        # winning side degenerate means every difference is 0; fall back to
        # the other side for the reported portfolios
        other = "positive" if side == "negative" else "negative"
        side, idx = other, 0
        w_l, w_k = weights_side[other]
        if w_l is None:
            # both sides degenerate (all-zero panel): evaluate one anyway
            # so the reported portfolios stay deterministic
            _, w_k = _sup_values(cols_k, families[other], mode, oracle_step)
            w_l = None
    if w_l is None:
        kappa = _expand(panel.n_assets, bench.allowed, w_k[0])
        lam = kappa
    else:
        lam = _expand(panel.n_assets, enlarged.allowed, w_l[idx])
        kappa = _expand(panel.n_assets, bench.allowed, w_k[idx])
    return SpanningResult(
        rho=math.sqrt(t) * float(diffs[flat_best]),
        side=side,
        utility_index=idx,
        lambda_star=lam,
        kappa_star=kappa,
        per_utility=diffs,
        n_negative=n_members["negative"],
        n_positive=n_members["positive"],
    )


def _expand(n: int, allowed, local: np.ndarray) -> np.ndarray:
    out = np.zeros(n)
    out[list(allowed)] = local
    return out


def rho_definition(
    panel: ReturnPanel,
    bench: PortfolioSet,
    enlarged: PortfolioSet,
    cfg: GridOracleConfig = GridOracleConfig(),
) -> float:
    """Definition-based saddle statistic over ramp functions and grids.

    For each sign, scans single ramp levels z over the knot grid and weight
    vectors over simplex grids; the inner min over the benchmark separates
    from the outer max over the enlarged set because the criterion is a
    difference of set-wise terms. Exact for the empirical distribution at the
    grid resolution; restricted to small faces.
    """
    _validate_nested(panel, bench, enlarged)
    if len(enlarged.allowed) > ORACLE_MAX_ASSETS:
        raise ValueError(
            f"definition oracle limited to faces with at most {ORACLE_MAX_ASSETS} assets"
        )
    t = panel.n_periods
    divisions = max(1, round(1.0 / cfg.lambda_step))
    cols_l = panel.values[:, list(enlarged.allowed)]
    cols_k = panel.values[:, list(bench.allowed)]
    u_l = simplex_grid(cols_l.shape[1], divisions) @ cols_l.T
    u_k = simplex_grid(cols_k.shape[1], divisions) @ cols_k.T

    best = 0.0
    neg = build_knots(panel, "negative", cfg.z_count).array()
    losses_l = np.minimum(u_l, 0.0)
    losses_k = np.minimum(u_k, 0.0)
    for z in neg:
        # integrated lower-tail cdf of each grid portfolio at level z
        j_l = -np.maximum(losses_l, z).mean(axis=1)
        j_k = -np.maximum(losses_k, z).mean(axis=1)
        best = max(best, float(j_k.min() - j_l.min()))
    pos = build_knots(panel, "positive", cfg.z_count).array()
    gains_l = np.maximum(u_l, 0.0)
    gains_k = np.maximum(u_k, 0.0)
    for z in pos:
        if z <= 0.0:
            continue
        j_l = z - np.minimum(gains_l, z).mean(axis=1)
        j_k = z - np.minimum(gains_k, z).mean(axis=1)
        best = max(best, float(j_k.min() - j_l.min()))
    return math.sqrt(t) * best


def super_efficiency_stat(
    panel: ReturnPanel,
    kappa: np.ndarray,
    enlarged: PortfolioSet,
    grid: GridParams = GridParams(),
    mode: Mode = "paper",
    oracle_step: float = 0.02,
) -> float:
    """Spanning statistic against a singleton benchmark portfolio.

    The benchmark-side supremum degenerates to evaluation at ``kappa``; the
    enlarged-side suprema use the regular solvers.
    """
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (panel.n_assets,):
        raise ValueError("kappa must be a weight vector on the panel universe")
    if kappa.min() < -1e-12 or abs(kappa.sum() - 1.0) > 1e-9:
        raise ValueError("kappa must lie on the simplex")
    outside = set(np.nonzero(kappa > 0)[0]) - set(enlarged.allowed)
    if outside:
        raise ValueError("kappa places weight outside the enlarged set")
    if tuple(enlarged.universe) != tuple(panel.assets):
        raise ValueError("portfolio set universe does not match the panel")
    t = panel.n_periods
    cols_l = panel.values[:, list(enlarged.allowed)]
    u_kappa = panel.values @ kappa
    best = 0.0
    for side, count, levels in (
        ("negative", grid.n1, grid.n2),
        ("positive", grid.p1, grid.p2),
    ):
        fam = build_family(panel, side, count, levels, cap=grid.weight_cap)
        if fam.grid.degenerate:
            continue
        vals_l, _ = _sup_values(cols_l, fam, mode, oracle_step)
        vals_k = _fixed_values(u_kappa, fam, mode)
        best = max(best, float(np.maximum(vals_l - vals_k, 0.0).max()))
    return math.sqrt(t) * best
