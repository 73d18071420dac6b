"""Utility-grid construction: knots, weight enumeration, coefficients, evaluation."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prospan import (
    KnotGrid,
    build_family,
    build_knots,
    enumerate_weights,
    eval_utility,
    family_size,
)
from prospan.utility import EnumerationError, PiecewiseUtility, family_from_grid

from conftest import make_panel


def brute_force_count(k_knots: int, k_levels: int) -> int:
    """Oracle: exhaustively enumerate level indices and count unit-sum vectors."""
    total = k_levels - 1
    return sum(
        1
        for combo in itertools.product(range(total + 1), repeat=k_knots)
        if sum(combo) == total
    )


class TestBuildKnots:
    def test_negative_side_formula(self):
        panel = make_panel([[-0.10, 0.05], [0.02, 0.01]])
        grid = build_knots(panel, "negative", 3)
        assert grid.knots == pytest.approx((-0.10, -0.05, 0.0))

    def test_all_positive_panel_degenerate(self):
        panel = make_panel([[0.01, 0.02], [0.03, 0.04]])
        grid = build_knots(panel, "negative", 10)
        assert grid.degenerate
        assert all(z == 0.0 for z in grid.knots)

    def test_positive_side_two_knots(self):
        panel = make_panel([[-0.10, 0.05], [0.01, 0.02]])
        grid = build_knots(panel, "positive", 2)
        assert grid.knots == pytest.approx((0.0, 0.05))

    def test_equal_spacing(self, rng):
        panel = make_panel(rng.normal(size=(10, 2)) * 0.05)
        for side in ("negative", "positive"):
            ks = np.asarray(build_knots(panel, side, 7).knots)
            steps = np.diff(ks)
            assert np.allclose(steps, steps[0])


class TestEnumerateWeights:
    def test_headline_count(self):
        w = enumerate_weights(10, 5)
        assert len(w) == 715

    def test_two_by_two(self):
        w = enumerate_weights(2, 2)
        assert sorted(map(tuple, w)) == [(0.0, 1.0), (1.0, 0.0)]

    def test_three_by_three_matches_exhaustive(self):
        w = enumerate_weights(3, 3)
        assert len(w) == 6 == brute_force_count(3, 3) == family_size(3, 3)

    @pytest.mark.parametrize("k", range(2, 7))
    @pytest.mark.parametrize("m", range(2, 7))
    def test_counts_match_exhaustive(self, k, m):
        assert family_size(k, m) == brute_force_count(k, m)
        assert len(enumerate_weights(k, m)) == family_size(k, m)

    def test_rows_sum_to_one_exactly(self):
        w = enumerate_weights(6, 5)
        # integer numerators over a common denominator keep sums exact
        assert np.all(w.sum(axis=1) == 1.0)

    def test_lexicographic_order(self):
        w = enumerate_weights(3, 3)
        rows = [tuple(r) for r in w]
        assert rows == sorted(rows)

    def test_cap_enforced(self):
        with pytest.raises(EnumerationError):
            enumerate_weights(30, 30, cap=10**6)


class TestCoefficients:
    def test_single_ramp_member(self):
        grid = KnotGrid("negative", (-0.1, 0.0))
        u = PiecewiseUtility(grid, (1, 0), 1)
        assert u.c1 == pytest.approx([1.0, 0.0])
        assert u.c0 == pytest.approx([-0.1, 0.0])

    def test_half_weights(self):
        grid = KnotGrid("negative", (-0.1, 0.0))
        u = PiecewiseUtility(grid, (1, 1), 2)
        assert u.c1 == pytest.approx([1.0, 0.5])
        assert u.c0 == pytest.approx([-0.05, 0.0])

    def test_active_set_includes_last(self):
        grid = KnotGrid("positive", (0.0, 0.05, 0.1))
        u = PiecewiseUtility(grid, (0, 2, 0), 2)
        assert u.active == (1, 2)

    def test_family_invariants(self, rng):
        panel = make_panel(rng.normal(size=(12, 2)) * 0.05)
        for side in ("negative", "positive"):
            fam = build_family(panel, side, 5, 4)
            c1 = fam.c1
            assert np.allclose(c1[:, 0], 1.0)
            assert np.all(np.diff(c1, axis=1) <= 1e-15)
            assert np.all((c1 >= -1e-15) & (c1 <= 1 + 1e-15))
            c0 = fam.c0
            if side == "negative":
                assert np.all(c0 <= 1e-15)
            else:
                assert np.all(c0 >= -1e-15)


class TestEvalUtility:
    def test_clamp_discrepancy_on_gains(self):
        grid = KnotGrid("negative", (-0.1, 0.0))
        u = PiecewiseUtility(grid, (1, 0), 1)
        assert eval_utility(u, 0.02, "paper") == pytest.approx(0.02)
        assert eval_utility(u, 0.02, "clamped") == 0.0

    def test_weight_on_zero_knot(self):
        grid = KnotGrid("negative", (-0.1, 0.0))
        u = PiecewiseUtility(grid, (0, 1), 1)
        assert eval_utility(u, -0.05, "paper") == 0.0
        assert eval_utility(u, -0.05, "clamped") == 0.0

    def test_positive_cap(self):
        grid = KnotGrid("positive", (0.0, 0.05))
        u = PiecewiseUtility(grid, (0, 1), 1)
        assert eval_utility(u, 0.08, "paper") == pytest.approx(0.05)
        assert eval_utility(u, 0.08, "clamped") == pytest.approx(0.05)

    @given(st.integers(0, 5), st.data())
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_x(self, member_idx, data):
        grid = KnotGrid("negative", (-0.2, -0.1, 0.0))
        fam = family_from_grid(grid, 3)
        u = fam.member(member_idx)
        a = data.draw(st.floats(-0.5, 0.5))
        b = data.draw(st.floats(-0.5, 0.5))
        lo, hi = min(a, b), max(a, b)
        for mode in ("paper", "clamped"):
            assert eval_utility(u, lo, mode) <= eval_utility(u, hi, mode) + 1e-15

    @given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
    @settings(max_examples=60, deadline=None)
    def test_negative_side_midpoint_convexity(self, a, b):
        grid = KnotGrid("negative", (-0.2, -0.1, 0.0))
        u = PiecewiseUtility(grid, (1, 1, 0), 2)
        mid = 0.5 * (a + b)
        lhs = eval_utility(u, mid, "paper")
        rhs = 0.5 * (eval_utility(u, a, "paper") + eval_utility(u, b, "paper"))
        assert lhs <= rhs + 1e-12

    @given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
    @settings(max_examples=60, deadline=None)
    def test_positive_side_midpoint_concavity(self, a, b):
        grid = KnotGrid("positive", (0.0, 0.1, 0.2))
        u = PiecewiseUtility(grid, (0, 1, 1), 2)
        mid = 0.5 * (a + b)
        lhs = eval_utility(u, mid, "paper")
        rhs = 0.5 * (eval_utility(u, a, "paper") + eval_utility(u, b, "paper"))
        assert lhs >= rhs - 1e-12

    def test_knot_values_match_segment_lines(self, rng):
        panel = make_panel(rng.normal(size=(10, 2)) * 0.08)
        fam = build_family(panel, "negative", 5, 3)
        z = fam.grid.array()
        for u in fam.members():
            c1 = np.append(u.c1, 0.0)
            c0 = np.append(u.c0, 0.0)
            for k, zk in enumerate(z):
                # on the segment right of knot k the branch is
                # (1 - c1[k+1]) * x + c0[k+1]
                seg = (1.0 - c1[k + 1]) * zk + c0[k + 1]
                assert eval_utility(u, zk, "paper") == pytest.approx(seg, abs=1e-12)

    def test_rescaling_equivariance_power_of_two(self, rng):
        panel = make_panel(rng.normal(size=(10, 2)) * 0.08)
        scaled = make_panel(panel.values * 2.0)
        fam = build_family(panel, "positive", 4, 3)
        fam2 = build_family(scaled, "positive", 4, 3)
        np.testing.assert_array_equal(fam2.grid.array(), 2.0 * fam.grid.array())
        x = rng.normal(size=20) * 0.1
        for i in (0, 3, 5):
            v1 = eval_utility(fam.member(i), x, "paper")
            v2 = eval_utility(fam2.member(i), 2.0 * x, "paper")
            np.testing.assert_array_equal(v2, 2.0 * v1)

    def test_family_dump_csv(self, tmp_path, rng):
        panel = make_panel(rng.normal(size=(6, 2)) * 0.05)
        fam = build_family(panel, "positive", 3, 3)
        out = tmp_path / "family.csv"
        fam.dump_csv(out)
        lines = out.read_text().strip().splitlines()
        assert len(lines) == len(fam) + 1
        assert lines[0].startswith("member,w_1")
