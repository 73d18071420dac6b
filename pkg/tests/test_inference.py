"""Subsampling distribution, quantiles, bias correction and the decision rule."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prospan import (
    GridParams,
    PortfolioSet,
    bias_corrected_quantile,
    quantile,
    rho_star,
    spanning_test,
    subsample_distribution,
)
from prospan.inference import SubsampleDistribution, block_lengths

from conftest import make_panel, nested_sets, random_panel

SMALL = GridParams(3, 2, 3, 2)


class TestSubsampleDistribution:
    def test_block_count(self, rng):
        panel = random_panel(rng, 5, 2)
        bench, enlarged = nested_sets(panel, 1)
        dist = subsample_distribution(panel, bench, enlarged, 3, SMALL)
        assert dist.values.size == 3

    def test_equal_sets_all_zero(self, rng):
        panel = random_panel(rng, 8, 2)
        full = PortfolioSet.full(panel.assets)
        dist = subsample_distribution(panel, full, full, 4, SMALL)
        assert np.all(dist.values == 0.0)

    def test_constant_panel_all_zero(self):
        panel = make_panel(np.full((7, 2), 0.004))
        bench, enlarged = nested_sets(panel, 1)
        dist = subsample_distribution(panel, bench, enlarged, 3, SMALL)
        assert np.all(dist.values == 0.0)

    def test_block_too_long(self, rng):
        panel = random_panel(rng, 5, 2)
        bench, enlarged = nested_sets(panel, 1)
        with pytest.raises(ValueError):
            subsample_distribution(panel, bench, enlarged, 6, SMALL)

    def test_full_block_equals_full_statistic(self, rng):
        panel = random_panel(rng, 9, 2)
        bench, enlarged = nested_sets(panel, 1)
        dist = subsample_distribution(panel, bench, enlarged, 9, SMALL)
        full = rho_star(panel, bench, enlarged, SMALL).rho
        assert dist.values.size == 1
        assert dist.values[0] == full

    def test_frozen_grids_reuse_full_sample_knots(self, rng):
        from prospan import build_knots
        from prospan.panel import window

        g = GridParams(4, 3, 4, 3)
        panel = random_panel(rng, 20, 2)
        bench, enlarged = nested_sets(panel, 1)
        frozen = subsample_distribution(
            panel, bench, enlarged, 6, g, freeze_grids=True
        )
        grids = (
            build_knots(panel, "negative", g.n1),
            build_knots(panel, "positive", g.p1),
        )
        manual = [
            rho_star(window(panel, s, 6), bench, enlarged, g, knot_grids=grids).rho
            for s in range(15)
        ]
        np.testing.assert_array_equal(frozen.values, manual)

    def test_knot_grid_override_changes_statistic(self, rng):
        # an extra asset that wins in moderate gains but loses in large
        # gains makes the optimal cap an interior knot, so the statistic
        # reacts to the knot range
        from prospan import build_knots
        from prospan.utility import KnotGrid

        g = GridParams(4, 3, 4, 3)
        a = rng.normal(0.01, 0.03, size=24)
        b = a.copy()
        mid = (a > 0) & (a < 0.03)
        b[mid] = a[mid] + 0.02
        b[a >= 0.03] = a[a >= 0.03] - 0.015
        panel = make_panel(np.column_stack([a, b]))
        bench, enlarged = nested_sets(panel, 1)
        r_default = rho_star(panel, bench, enlarged, g).rho
        wide = tuple(
            KnotGrid(side, tuple(5 * z for z in build_knots(panel, side, 4).knots))
            for side in ("negative", "positive")
        )
        r_wide = rho_star(panel, bench, enlarged, g, knot_grids=wide).rho
        assert abs(r_default - r_wide) > 1e-6

    def test_jobs_do_not_change_values(self, rng):
        panel = random_panel(rng, 16, 2)
        bench, enlarged = nested_sets(panel, 1)
        one = subsample_distribution(panel, bench, enlarged, 5, SMALL, jobs=1)
        two = subsample_distribution(panel, bench, enlarged, 5, SMALL, jobs=2)
        eight = subsample_distribution(panel, bench, enlarged, 5, SMALL, jobs=8)
        np.testing.assert_array_equal(one.values, two.values)
        np.testing.assert_array_equal(one.values, eight.values)


class TestQuantile:
    def test_constant_values(self):
        dist = SubsampleDistribution(3, np.full(10, 0.1))
        assert quantile(dist, 0.95) == pytest.approx(0.1)

    def test_order_statistic(self):
        dist = SubsampleDistribution(3, np.arange(1.0, 101.0))
        assert quantile(dist, 0.95) == 95.0

    def test_inf_convention_at_mass_point(self):
        dist = SubsampleDistribution(2, np.array([0.0, 0.0, 0.0, 5.0]))
        assert quantile(dist, 0.75) == 0.0

    def test_level_domain(self):
        dist = SubsampleDistribution(2, np.array([1.0, 2.0]))
        for bad in (0.5, 1.0, 0.2):
            with pytest.raises(ValueError):
                quantile(dist, bad)

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=40))
    @settings(max_examples=80, deadline=None)
    def test_monotone_in_level_and_max_at_top(self, values):
        dist = SubsampleDistribution(2, np.asarray(values))
        levels = [0.51, 0.6, 0.75, 0.9, 0.99]
        qs = [quantile(dist, lev) for lev in levels]
        assert all(a <= b for a, b in zip(qs, qs[1:]))
        assert qs[-1] <= max(values)
        assert quantile(dist, 1 - 1e-9) == max(values)


class TestBiasCorrection:
    def test_constant_quantiles(self):
        q_bc, g0, g1 = bias_corrected_quantile({10: 0.3, 20: 0.3, 40: 0.3}, 500)
        assert q_bc == pytest.approx(0.3, abs=1e-14)
        assert g1 == pytest.approx(0.0, abs=1e-12)

    def test_exact_line_reproduced(self):
        a, g, t = 0.01, 0.5, 500
        qs = {b: a + g / b for b in (12, 25, 60, 120)}
        q_bc, g0, g1 = bias_corrected_quantile(qs, t)
        assert q_bc == pytest.approx(a + g / t, abs=1e-12)
        assert g0 == pytest.approx(a, abs=1e-12)
        assert g1 == pytest.approx(g, abs=1e-10)

    def test_matches_hand_rolled_ols(self, rng):
        for _ in range(10):
            bs = sorted(rng.choice(np.arange(10, 200), size=4, replace=False))
            qs = {int(b): float(0.02 + 0.4 / b + rng.normal(0, 1e-3)) for b in bs}
            q_bc, g0, g1 = bias_corrected_quantile(qs, 400)
            # independent least squares through the normal equations
            x = np.array([1.0 / b for b in sorted(qs)])
            y = np.array([qs[b] for b in sorted(qs)])
            xbar, ybar = x.mean(), y.mean()
            slope = ((x - xbar) * (y - ybar)).sum() / ((x - xbar) ** 2).sum()
            intercept = ybar - slope * xbar
            assert g0 == pytest.approx(intercept, abs=1e-12)
            assert g1 == pytest.approx(slope, abs=1e-12)
            assert q_bc == pytest.approx(intercept + slope / 400, abs=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            bias_corrected_quantile({30: 0.1}, 100)


class TestBlockLengths:
    def test_default_grid(self):
        bs = block_lengths(516)
        assert bs == sorted(set(bs))
        assert all(10 <= b <= 516 for b in bs)
        assert len(bs) == 4

    def test_duplicates_removed(self):
        assert block_lengths(100, (0.6, 0.6, 0.9)) == block_lengths(100, (0.6, 0.9))


class TestSpanningTest:
    def test_equal_sets_always_spanning(self, rng):
        panel = random_panel(rng, 60, 2)
        full = PortfolioSet.full(panel.assets)
        for alpha in (0.01, 0.05, 0.10):
            dec = spanning_test(panel, full, full, alpha=alpha, grid=SMALL)
            assert dec.decision == "Spanning"
            assert dec.rho == 0.0
            assert dec.q_bc == 0.0

    def test_strict_inequality_on_zero_boundary(self, rng):
        base = rng.normal(0.005, 0.04, size=(60, 1))
        panel = make_panel(np.column_stack([base, base[:, 0]]))
        bench, enlarged = nested_sets(panel, 1)
        dec = spanning_test(panel, bench, enlarged, grid=SMALL)
        assert (dec.rho, dec.q_bc) == (0.0, 0.0)
        assert dec.decision == "Spanning"

    def test_decision_matches_rule(self, rng):
        panel = random_panel(rng, 60, 2)
        bench, enlarged = nested_sets(panel, 1)
        dec = spanning_test(panel, bench, enlarged, grid=SMALL)
        expected = "RejectSpanning" if dec.rho > dec.q_bc else "Spanning"
        assert dec.decision == expected
        assert set(dec.quantiles_per_b) == set(block_lengths(60))

    def test_alpha_domain(self, rng):
        panel = random_panel(rng, 60, 2)
        bench, enlarged = nested_sets(panel, 1)
        for bad in (0.0, 0.5, 0.7):
            with pytest.raises(ValueError):
                spanning_test(panel, bench, enlarged, alpha=bad, grid=SMALL)

    def test_short_panel_rejected(self, rng):
        panel = random_panel(rng, 20, 2)
        bench, enlarged = nested_sets(panel, 1)
        with pytest.raises(ValueError):
            spanning_test(panel, bench, enlarged, grid=SMALL)

    def test_deterministic_across_jobs(self, rng):
        panel = random_panel(rng, 60, 2)
        bench, enlarged = nested_sets(panel, 1)
        d1 = spanning_test(panel, bench, enlarged, grid=SMALL, jobs=1)
        d8 = spanning_test(panel, bench, enlarged, grid=SMALL, jobs=8)
        assert d1 == d8
