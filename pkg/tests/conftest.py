"""Shared fixtures and panel factories."""

import numpy as np
import pytest

from prospan import PortfolioSet, ReturnPanel


def month_labels(t: int, start_year: int = 1990):
    return tuple(
        f"{start_year + i // 12:04d}{i % 12 + 1:02d}" for i in range(t)
    )


def make_panel(values, labels=None, start_year: int = 1990) -> ReturnPanel:
    values = np.asarray(values, dtype=float)
    if labels is None:
        labels = tuple(f"A{i}" for i in range(values.shape[1]))
    return ReturnPanel(month_labels(values.shape[0], start_year), tuple(labels), values)


def random_panel(rng, t: int, n: int, mean=0.005, sd=0.04) -> ReturnPanel:
    return make_panel(rng.normal(mean, sd, size=(t, n)))


def nested_sets(panel: ReturnPanel, k_count: int):
    bench = PortfolioSet(panel.assets, tuple(range(k_count)))
    enlarged = PortfolioSet.full(panel.assets)
    return bench, enlarged


@pytest.fixture
def rng():
    return np.random.default_rng(42)
