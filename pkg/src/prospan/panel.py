"""Dated return panels: ingestion, alignment, windowing, descriptive stats.

A panel is a T x n matrix of monthly simple net returns (decimal units) with
one row per month and one column per asset. Months are normalized to a YYYYMM
string so joins are bit-exact.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

_MONTH_RE = re.compile(r"^(\d{4})[-/]?(\d{2})(?:[-/]?\d{2})?$")


class PanelError(ValueError):
    """Raised when a return panel violates its invariants or cannot be built."""


def normalize_month(raw: str) -> str:
    """Normalize a month identifier (YYYYMM, YYYY-MM, YYYY-MM-DD) to YYYYMM."""
    m = _MONTH_RE.match(raw.strip())
    if m is None:
        raise PanelError(f"unrecognized month identifier: {raw!r}")
    year, month = m.group(1), m.group(2)
    if not 1 <= int(month) <= 12:
        raise PanelError(f"month out of range in identifier: {raw!r}")
    return year + month


@dataclass(frozen=True)
class ReturnPanel:
    """Immutable panel of dated asset returns.

    Attributes:
        dates: strictly increasing YYYYMM month identifiers, one per row.
        assets: unique asset labels, one per column.
        values: T x n float array of simple net returns.
        dropped_rows: rows discarded at ingestion (missing/non-numeric cells).
    """

    dates: tuple[str, ...]
    assets: tuple[str, ...]
    values: np.ndarray
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        if values.ndim != 2:
            raise PanelError("values must be a 2-d array")
        t, n = values.shape
        if t < 2:
            raise PanelError(f"panel needs at least 2 rows, got {t}")
        if n < 1:
            raise PanelError("panel needs at least 1 asset")
        if len(self.dates) != t:
            raise PanelError("dates length does not match row count")
        if len(self.assets) != n:
            raise PanelError("assets length does not match column count")
        if len(set(self.assets)) != n:
            raise PanelError("duplicate asset labels")
        if not np.all(np.isfinite(values)):
            raise PanelError("panel contains non-finite values")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise PanelError("dates must be strictly increasing")
        values.flags.writeable = False

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.assets.index(label)]


@dataclass(frozen=True)
class SeriesStats:
    """Sample mean/sd plus standardized third and fourth moments.

    sd uses denominator (length - 1). Skewness and kurtosis use population
    central moments (m3 / m2^1.5 and m4 / m2^2, kurtosis not excess) and are
    NaN for a constant series.
    """

    mean: float
    sd: float
    skewness: float
    kurtosis: float


def load_panel(path, fmt: str = "csv", scale: float = 1.0) -> ReturnPanel:
    """Load a return panel from a CSV file.

    The first column holds a month identifier; remaining columns are decimal
    returns. Rows with any missing or non-numeric cell are dropped and counted
    in ``dropped_rows``. ``scale`` multiplies all values (use 0.01 for files
    quoted in percent).
    """
    if fmt != "csv":
        raise PanelError(f"unsupported format: {fmt!r}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise PanelError(f"empty file: {path}") from None
            assets = [h.strip() for h in header[1:]]
            if not assets:
                raise PanelError("no asset columns in header")
            if len(set(assets)) != len(assets):
                raise PanelError("duplicate asset labels in header")
            dates: list[str] = []
            rows: list[list[float]] = []
            dropped = 0
            for rec in reader:
                if not rec or all(cell.strip() == "" for cell in rec):
                    continue
                if len(rec) != len(assets) + 1:
                    dropped += 1
                    continue
                try:
                    date = normalize_month(rec[0])
                    vals = [float(cell) for cell in rec[1:]]
                except (PanelError, ValueError):
                    dropped += 1
                    continue
                if not all(math.isfinite(v) for v in vals):
                    dropped += 1
                    continue
                dates.append(date)
                rows.append(vals)
    except OSError as exc:
        raise PanelError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise PanelError(f"no usable rows in {path} ({dropped} dropped)")
    values = np.asarray(rows, dtype=float) * float(scale)
    order = np.argsort(np.asarray(dates))
    values = values[order]
    dates = [dates[i] for i in order]
    return ReturnPanel(tuple(dates), tuple(assets), values, dropped_rows=dropped)


def align(a: ReturnPanel, b: ReturnPanel) -> ReturnPanel:
    """Horizontally join two panels on the intersection of their dates.

    Asset order is a's assets followed by b's assets; label collisions and an
    empty date intersection are errors.
    """
    common = sorted(set(a.dates) & set(b.dates))
    if not common:
        raise PanelError("panels share no dates")
    ia = {d: i for i, d in enumerate(a.dates)}
    ib = {d: i for i, d in enumerate(b.dates)}
    rows_a = a.values[[ia[d] for d in common]]
    rows_b = b.values[[ib[d] for d in common]]
    return ReturnPanel(
        tuple(common),
        tuple(a.assets) + tuple(b.assets),
        np.hstack([rows_a, rows_b]),
    )


def window(panel: ReturnPanel, start: int, length: int) -> ReturnPanel:
    """Contiguous sub-panel of ``length`` rows beginning at row ``start``."""
    if start < 0 or length < 2:
        raise PanelError(f"invalid window: start={start}, length={length}")
    if start + length > panel.n_periods:
        raise PanelError(
            f"window out of range: start={start}, length={length}, T={panel.n_periods}"
        )
    return ReturnPanel(
        panel.dates[start : start + length],
        panel.assets,
        panel.values[start : start + length],
    )


def summary_stats(series) -> SeriesStats:
    """Descriptive statistics of a single series (length >= 2)."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise PanelError("series must be 1-d with length >= 2")
    if not np.all(np.isfinite(x)):
        raise PanelError("series contains non-finite values")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    dev = x - mean
    m2 = float(np.mean(dev**2))
    if m2 == 0.0:
        return SeriesStats(mean, 0.0, float("nan"), float("nan"))
    skew = float(np.mean(dev**3) / m2**1.5)
    kurt = float(np.mean(dev**4) / m2**2)
    return SeriesStats(mean, sd, skew, kurt)
