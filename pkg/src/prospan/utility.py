"""Finite families of piecewise-linear one-sided utility branches.

Each branch is a convex mixture of ramp functions over an equally spaced knot
grid: max(x, z) ramps on the loss side (convex, increasing), min(x, z) ramps
on the gain side (concave, increasing). Mixture weights are enumerated on a
rational grid so families are finite and enumeration is reproducible.

Weights are carried as integer numerators over the denominator (levels - 1);
they are converted to floats only where the solvers need them.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Literal

import numpy as np

from .panel import ReturnPanel

Side = Literal["negative", "positive"]
Mode = Literal["paper", "clamped"]

DEFAULT_WEIGHT_CAP = 10**7


class EnumerationError(ValueError):
    """Raised when a weight-grid enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class KnotGrid:
    """Equally spaced knots on one half-line.

    Negative side: knots run from the panel's most negative return up to 0.
    Positive side: from 0 up to the largest return. A one-signed panel yields
    a degenerate all-zero grid on the opposite side, which is allowed.
    """

    side: Side
    knots: tuple[float, ...]

    def __post_init__(self):
        if self.side not in ("negative", "positive"):
            raise ValueError(f"invalid side: {self.side!r}")
        if len(self.knots) < 2:
            raise ValueError("knot grid needs at least 2 knots")
        ks = np.asarray(self.knots, dtype=float)
        if np.any(np.diff(ks) < 0):
            raise ValueError("knots must be nondecreasing")
        if self.side == "negative":
            if ks[-1] != 0.0 or ks[0] > 0.0:
                raise ValueError("negative grid must end at 0 with first knot <= 0")
        else:
            if ks[0] != 0.0 or ks[-1] < 0.0:
                raise ValueError("positive grid must start at 0 with last knot >= 0")

    @property
    def degenerate(self) -> bool:
        """True when every knot is 0 (one-signed panel on this side)."""
        return all(z == 0.0 for z in self.knots)

    def array(self) -> np.ndarray:
        return np.asarray(self.knots, dtype=float)


@dataclass(frozen=True)
class PiecewiseUtility:
    """One mixture member: weights on the knot grid plus derived coefficients.

    c1[k] is the tail weight sum over knots k.. and c0[k] the tail sum of
    weight * knot; ``active`` lists the positive-weight knots plus the last
    knot (0-based indices).
    """

    grid: KnotGrid
    numerators: tuple[int, ...]
    denominator: int

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.numerators, dtype=float) / self.denominator

    @property
    def c1(self) -> np.ndarray:
        return np.cumsum(self.weights[::-1])[::-1]

    @property
    def c0(self) -> np.ndarray:
        return np.cumsum((self.weights * self.grid.array())[::-1])[::-1]

    @property
    def active(self) -> tuple[int, ...]:
        idx = {k for k, a in enumerate(self.numerators) if a > 0}
        idx.add(len(self.numerators) - 1)
        return tuple(sorted(idx))

    @property
    def side(self) -> Side:
        return self.grid.side


def build_knots(panel: ReturnPanel, side: Side, count: int) -> KnotGrid:
    """Equally spaced knots spanning the panel's one-sided return range.

    The loss bound is min(min(Y), 0) and the gain bound max(max(Y), 0), taken
    over all assets and dates.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    if side == "negative":
        lo = min(float(panel.values.min()), 0.0)
        steps = np.arange(count, dtype=float)
        knots = lo - steps / (count - 1) * lo
        knots[-1] = 0.0
    elif side == "positive":
        hi = max(float(panel.values.max()), 0.0)
        steps = np.arange(count, dtype=float)
        knots = steps / (count - 1) * hi
        knots[0] = 0.0
    else:
        raise ValueError(f"invalid side: {side!r}")
    return KnotGrid(side, tuple(float(z) for z in knots))


def family_size(k_knots: int, k_levels: int) -> int:
    """Number of weight vectors on the grid: C(k_knots + k_levels - 2, k_knots - 1)."""
    return math.comb(k_knots + k_levels - 2, k_knots - 1)


def _compositions(parts: int, total: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(parts - 1, total - first):
            yield (first,) + rest


@lru_cache(maxsize=32)
def _numerator_table(k_knots: int, k_levels: int) -> np.ndarray:
    total = k_levels - 1
    table = np.array(list(_compositions(k_knots, total)), dtype=np.int64)
    return table


def enumerate_weights(
    k_knots: int, k_levels: int, cap: int = DEFAULT_WEIGHT_CAP
) -> np.ndarray:
    """All weight vectors in {0, 1/(k_levels-1), ..., 1}^k_knots summing to 1.

    Rows are sorted lexicographically ascending. Raises EnumerationError when
    the stars-and-bars count exceeds ``cap``.
    """
    if k_knots < 2 or k_levels < 2:
        raise ValueError("k_knots and k_levels must be >= 2")
    count = family_size(k_knots, k_levels)
    if count > cap:
        raise EnumerationError(
            f"weight grid has {count} members, above the cap of {cap}"
        )
    return _numerator_table(k_knots, k_levels) / float(k_levels - 1)


@dataclass(frozen=True)
class UtilityFamily:
    """All mixtures over one knot grid, with stacked coefficient arrays.

    The stacked views (one row per member) are what the inner-problem solvers
    consume; ``member`` materializes a single PiecewiseUtility for inspection.
    """

    grid: KnotGrid
    numerators: np.ndarray  # members x knots, int64
    denominator: int

    def __post_init__(self):
        self.numerators.flags.writeable = False

    def __len__(self) -> int:
        return self.numerators.shape[0]

    @property
    def side(self) -> Side:
        return self.grid.side

    @property
    def weights(self) -> np.ndarray:
        return self.numerators / float(self.denominator)

    @property
    def c1(self) -> np.ndarray:
        return np.cumsum(self.weights[:, ::-1], axis=1)[:, ::-1]

    @property
    def c0(self) -> np.ndarray:
        wz = self.weights * self.grid.array()[None, :]
        return np.cumsum(wz[:, ::-1], axis=1)[:, ::-1]

    def member(self, index: int) -> PiecewiseUtility:
        return PiecewiseUtility(
            self.grid, tuple(int(a) for a in self.numerators[index]), self.denominator
        )

    def members(self) -> list[PiecewiseUtility]:
        return [self.member(i) for i in range(len(self))]

    def dump_csv(self, path) -> None:
        """Audit dump: one row per member with weights, c0 and c1 vectors."""
        k = self.numerators.shape[1]
        c0, c1 = self.c0, self.c1
        w = self.weights
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = (
                ["member"]
                + [f"w_{j + 1}" for j in range(k)]
                + [f"c0_{j + 1}" for j in range(k)]
                + [f"c1_{j + 1}" for j in range(k)]
            )
            writer.writerow(header)
            for i in range(len(self)):
                row = [i] + [repr(float(v)) for v in (*w[i], *c0[i], *c1[i])]
                writer.writerow(row)


def build_family(
    panel: ReturnPanel,
    side: Side,
    k_knots: int,
    k_levels: int,
    cap: int = DEFAULT_WEIGHT_CAP,
) -> UtilityFamily:
    """Enumerate the full mixture family over the panel's knot grid."""
    grid = build_knots(panel, side, k_knots)
    return family_from_grid(grid, k_levels, cap=cap)


def family_from_grid(
    grid: KnotGrid, k_levels: int, cap: int = DEFAULT_WEIGHT_CAP
) -> UtilityFamily:
    k_knots = len(grid.knots)
    count = family_size(k_knots, k_levels)
    if count > cap:
        raise EnumerationError(
            f"weight grid has {count} members, above the cap of {cap}"
        )
    return UtilityFamily(grid, _numerator_table(k_knots, k_levels), k_levels - 1)


def eval_utility(u: PiecewiseUtility, x, mode: Mode = "paper"):
    """Evaluate one utility branch at x (scalar or array).

    Paper mode applies the ramp mixture on the whole line; clamped mode first
    clips x to the branch's own half-line, which is how the formal one-sided
    families treat the opposite sign.
    """
    x = np.asarray(x, dtype=float)
    z = u.grid.array()
    w = u.weights
    if u.side == "negative":
        arg = np.minimum(x, 0.0) if mode == "clamped" else x
        vals = np.maximum(arg[..., None], z)
    else:
        arg = np.maximum(x, 0.0) if mode == "clamped" else x
        vals = np.minimum(arg[..., None], z)
    out = vals @ w
    return float(out) if out.ndim == 0 else out


def eval_family(family: UtilityFamily, x, mode: Mode = "paper") -> np.ndarray:
    """Evaluate every member at x; returns shape x.shape + (members,)."""
    x = np.asarray(x, dtype=float)
    z = family.grid.array()
    if family.side == "negative":
        arg = np.minimum(x, 0.0) if mode == "clamped" else x
        vals = np.maximum(arg[..., None], z)
    else:
        arg = np.maximum(x, 0.0) if mode == "clamped" else x
        vals = np.minimum(arg[..., None], z)
    return vals @ family.weights.T
