"""Inner expected-utility maximization over simplex faces.

For one utility branch and a face of the standard simplex (nonnegative
weights summing to 1, support restricted to an allowed asset subset):

* gain-side branches are concave, so the supremum is a small LP (hypograph
  form); faces with one or two assets are solved exactly by scanning the
  kink candidates of the piecewise-linear objective;
* loss-side branches are convex, so expected utility is convex in the weight
  vector and the maximum sits at a vertex of the face, i.e. a single asset —
  solved by exact enumeration.

A brute-force simplex-grid oracle is provided for cross-checks.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .panel import ReturnPanel
from .utility import Mode, PiecewiseUtility, UtilityFamily, eval_utility

LP_TOLERANCE = 1e-8
SIMPLEX_TOLERANCE = 1e-9


class SolverError(RuntimeError):
    """Raised when an inner LP fails or its solution fails validation."""


@dataclass(frozen=True)
class PortfolioSet:
    """A face of the standard simplex: weights outside ``allowed`` are 0."""

    universe: tuple[str, ...]
    allowed: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        allowed = tuple(sorted(set(int(i) for i in self.allowed)))
        object.__setattr__(self, "allowed", allowed)
        if not allowed:
            raise ValueError("allowed asset set must be nonempty")
        if allowed[0] < 0 or allowed[-1] >= len(self.universe):
            raise ValueError("allowed indices outside the universe")

    @classmethod
    def full(cls, universe: Sequence[str]) -> "PortfolioSet":
        return cls(tuple(universe), tuple(range(len(universe))))

    @classmethod
    def from_labels(
        cls, universe: Sequence[str], labels: Sequence[str]
    ) -> "PortfolioSet":
        uni = tuple(universe)
        return cls(uni, tuple(uni.index(lab) for lab in labels))

    def is_subset_of(self, other: "PortfolioSet") -> bool:
        return self.universe == other.universe and set(self.allowed) <= set(
            other.allowed
        )


@dataclass(frozen=True)
class EuSolution:
    """Optimal expected utility over a face, with an attaining weight vector."""

    value: float
    weights: np.ndarray
    status: Literal["optimal", "degenerate"] = "optimal"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.min() < -SIMPLEX_TOLERANCE or abs(w.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError("weights must lie on the simplex")
        w.flags.writeable = False


def _full_weights(n: int, allowed: Sequence[int], local: np.ndarray) -> np.ndarray:
    w = np.zeros(n)
    w[list(allowed)] = local
    return w


def concave_pieces(u: PiecewiseUtility) -> list[tuple[float, float]]:
    """Affine upper pieces (slope, intercept) whose minimum is the gain branch.

    The branch is linear with slope 1 left of its first weighted knot; each
    weighted knot drops the slope to the remaining tail weight, and the
    intercept keeps the function continuous.
    """
    c1 = np.append(u.c1, 0.0)
    c0 = np.append(u.c0, 0.0)
    top = c0[0]
    pieces = [(1.0, 0.0)]
    for p in u.active:
        pieces.append((float(c1[p + 1]), float(top - c0[p + 1])))
    seen = []
    for piece in pieces:
        if piece not in seen:
            seen.append(piece)
    return seen


def concave_value_at(u: PiecewiseUtility, portfolio_returns: np.ndarray) -> float:
    """Expected gain-branch utility of a fixed portfolio return series."""
    z = u.grid.array()
    s = np.minimum(portfolio_returns[:, None], z).mean(axis=0)
    return float(s @ u.weights)


def _candidate_mixes(ycols: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Mixing fractions where a two-asset portfolio return crosses a knot.

    The expected-utility objective is piecewise linear in the mixing fraction
    with kinks only at these crossings, so scanning them plus the endpoints is
    an exact maximization.
    """
    d = ycols[:, 0] - ycols[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (knots[None, :] - ycols[:, 1][:, None]) / d[:, None]
    x = x[np.isfinite(x)]
    x = x[(x > 0.0) & (x < 1.0)]
    return np.unique(np.concatenate([x, [0.0, 1.0]]))


def concave_sup_small(
    ycols: np.ndarray, family: UtilityFamily
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gain-side suprema for every member over a 1- or 2-asset face.

    Returns (values, local_weights) with one row of weights per member.
    """
    knots = family.grid.array()
    w_t = family.weights.T
    if ycols.shape[1] == 1:
        s = np.minimum(ycols[:, 0][:, None], knots).mean(axis=0)
        values = s @ w_t
        weights = np.ones((len(family), 1))
        return values, weights
    cand = _candidate_mixes(ycols, knots)
    u = cand[:, None] * ycols[:, 0][None, :] + (1.0 - cand)[:, None] * ycols[:, 1][None, :]
    s = np.minimum(u[:, :, None], knots).mean(axis=1)
    scores = s @ w_t
    best = np.argmax(scores, axis=0)
    values = scores[best, np.arange(len(family))]
    xstar = cand[best]
    weights = np.column_stack([xstar, 1.0 - xstar])
    return values, weights


def lp_canonical_text(
    ycols: np.ndarray, pieces: Sequence[tuple[float, float]]
) -> str:
    """Plain-text dump of a gain-side LP instance for solver-independent replay."""
    out = io.StringIO()
    t, k = ycols.shape
    out.write(f"maximize (1/{t}) * sum_t y_t\n")
    out.write(f"subject to: lam >= 0, sum(lam) = 1, lam in R^{k}, y in R^{t}\n")
    for j, (slope, intercept) in enumerate(pieces):
        out.write(f"piece {j}: y_t <= {slope!r} * dot(lam, Y[t]) + {intercept!r}\n")
    out.write("returns matrix Y (one row per t):\n")
    for row in ycols:
        out.write(",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()


def concave_sup_lp(
    ycols: np.ndarray,
    knots: np.ndarray,
    weights: np.ndarray,
    pieces: Sequence[tuple[float, float]],
) -> tuple[float, np.ndarray]:
    """Hypograph LP for the gain-side supremum over a face with >= 3 assets.

    The reported value is the ramp mixture re-evaluated at the cleaned
    optimal weights; a mismatch with the LP optimum beyond LP_TOLERANCE means
    the solution is rejected rather than silently accepted.
    """
    t, k = ycols.shape
    nv = k + t
    cost = np.zeros(nv)
    cost[k:] = -1.0 / t
    eye = sparse.eye(t, format="csr")
    blocks = []
    rhs = []
    for slope, intercept in pieces:
        blocks.append(sparse.hstack([sparse.csr_matrix(-slope * ycols), eye]))
        rhs.append(np.full(t, intercept))
    a_ub = sparse.vstack(blocks, format="csr")
    b_ub = np.concatenate(rhs)
    a_eq = sparse.csr_matrix(
        (np.ones(k), (np.zeros(k, dtype=int), np.arange(k))), shape=(1, nv)
    )
    bounds = [(0, None)] * k + [(None, None)] * t
    res = linprog(
        cost,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        raise SolverError(
            f"LP failed (status {res.status}: {res.message})\n"
            + lp_canonical_text(ycols, pieces)
        )
    lam = np.clip(res.x[:k], 0.0, None)
    total = lam.sum()
    if abs(total - 1.0) > 1e-7:
        raise SolverError(
            "LP weights off the simplex\n" + lp_canonical_text(ycols, pieces)
        )
    lam = lam / total
    s = np.minimum((ycols @ lam)[:, None], knots).mean(axis=0)
    value = float(s @ weights)
    if abs(value - (-res.fun)) > LP_TOLERANCE:
        raise SolverError(
            f"LP value {-res.fun!r} not reproduced by its weights ({value!r})\n"
            + lp_canonical_text(ycols, pieces)
        )
    return value, lam


def max_eu_concave(
    panel: ReturnPanel,
    pset: PortfolioSet,
    u: PiecewiseUtility,
    solver: Literal["auto", "lp"] = "auto",
) -> EuSolution:
    """Supremum of expected gain-branch utility over a simplex face."""
    if u.side != "positive":
        raise ValueError("max_eu_concave expects a positive-side utility")
    ycols = panel.values[:, list(pset.allowed)]
    status = "degenerate" if u.grid.degenerate else "optimal"
    if solver == "auto" and ycols.shape[1] <= 2:
        family = UtilityFamily(
            u.grid, np.asarray([u.numerators], dtype=np.int64), u.denominator
        )
        values, weights = concave_sup_small(ycols, family)
        full = _full_weights(panel.n_assets, pset.allowed, weights[0])
        return EuSolution(float(values[0]), full, status)
    value, lam = concave_sup_lp(
        ycols, u.grid.array(), u.weights, concave_pieces(u)
    )
    return EuSolution(value, _full_weights(panel.n_assets, pset.allowed, lam), status)


def convex_vertex_values(ycols: np.ndarray, family: UtilityFamily) -> np.ndarray:
    """Expected loss-branch utility of each single asset for every member.

    Shape (assets, members); entry (i, m) is the mean over dates of member
    m's ramp mixture applied to asset i.
    """
    knots = family.grid.array()
    m = np.maximum(ycols[:, :, None], knots).mean(axis=0)
    return m @ family.weights.T


def max_eu_convex(
    panel: ReturnPanel, pset: PortfolioSet, u: PiecewiseUtility
) -> EuSolution:
    """Maximum of expected loss-branch utility over a face (vertex optimum).

    The loss branch is convex, so the expectation is convex in the weights
    and maximized at a vertex; ties go to the lowest asset index.
    """
    if u.side != "negative":
        raise ValueError("max_eu_convex expects a negative-side utility")
    ycols = panel.values[:, list(pset.allowed)]
    family = UtilityFamily(
        u.grid, np.asarray([u.numerators], dtype=np.int64), u.denominator
    )
    vals = convex_vertex_values(ycols, family)[:, 0]
    best = int(np.argmax(vals))
    local = np.zeros(ycols.shape[1])
    local[best] = 1.0
    status = "degenerate" if u.grid.degenerate else "optimal"
    return EuSolution(
        float(vals[best]), _full_weights(panel.n_assets, pset.allowed, local), status
    )


def simplex_grid(k: int, divisions: int) -> np.ndarray:
    """All points of the k-simplex with coordinates in multiples of 1/divisions."""
    if k == 1:
        return np.ones((1, 1))
    points = []

    def rec(prefix, remaining, parts):
        if parts == 1:
            points.append(prefix + [remaining])
            return
        for a in range(remaining + 1):
            rec(prefix + [a], remaining - a, parts - 1)

    rec([], divisions, k)
    return np.asarray(points, dtype=float) / divisions


def grid_oracle(
    panel: ReturnPanel,
    pset: PortfolioSet,
    u: PiecewiseUtility,
    step: float,
    mode: Mode = "paper",
) -> float:
    """Brute-force supremum of expected utility over a simplex grid.

    Exhaustive by construction; restricted to small faces because the grid
    size is combinatorial in the number of allowed assets.
    """
    if len(pset.allowed) > 4:
        raise ValueError("grid oracle limited to faces with at most 4 assets")
    if not 0.0 < step <= 1.0:
        raise ValueError("step must be in (0, 1]")
    ycols = panel.values[:, list(pset.allowed)]
    divisions = max(1, round(1.0 / step))
    grid = simplex_grid(ycols.shape[1], divisions)
    u_all = grid @ ycols.T
    values = eval_utility(u, u_all, mode).mean(axis=1)
    return float(values.max())


def lambda_lipschitz(panel: ReturnPanel, pset: PortfolioSet) -> float:
    """Bound on the grid-rounding error slope of expected-utility objectives.

    Ramp mixtures have unit slope, so moving a weight vector by eps in l1
    moves the objective by at most eps * max|Y|; on a simplex grid of mesh
    ``step`` the nearest grid point is within (n - 1) * step in l1.
    """
    ycols = panel.values[:, list(pset.allowed)]
    return float(np.abs(ycols).max()) * max(1, ycols.shape[1] - 1)
