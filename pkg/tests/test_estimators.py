import math
import warnings

import numpy as np
import pytest

from perclab.estimators import (
    BracketError,
    I_hat,
    II_hat,
    InsufficientSignal,
    TruncationWarning,
    alpha_hat,
    beta_hat,
    chi_plain,
    chi_tilted_hat,
    level_weight,
    nabla_from_table,
    p_c_proxy,
    p_u_by_alpha_inversion,
    sum_tau_squared,
)
from perclab.geometry import BallSpec, level_count
from perclab.mc import TwoPointTable, estimate_two_point, triangle_mc

SPEC = BallSpec(3, 6, 12)


@pytest.fixture(scope="module")
def table_sub():
    # subcritical: clean exponential decay in both directions
    return estimate_two_point(0.3, SPEC, 20000, 42)


@pytest.fixture(scope="module")
def table_zero():
    return estimate_two_point(0.0, SPEC, 100, 1)


@pytest.fixture(scope="module")
def table_one():
    return estimate_two_point(1.0, SPEC, 100, 1)


def synthetic_table(spec, taus_by_orbit, samples):
    """Build a table with prescribed hit fractions (line-symmetric)."""
    mm = spec.line_halfwidth
    hits = np.zeros((spec.tree_radius + 1, 2 * mm + 1), np.int64)
    for (n, m), tau in taus_by_orbit.items():
        hits[n, mm + m] = round(tau * samples)
        hits[n, mm - m] = round(tau * samples)
    return TwoPointTable(spec, 0.5, samples, 0, hits)


class TestDecayRates:
    def test_p_zero_rates_vanish(self, table_zero):
        assert alpha_hat(table_zero).sup_estimate == 0.0
        assert beta_hat(table_zero).sup_estimate == 0.0

    def test_p_one_rates_are_one(self, table_one):
        a = alpha_hat(table_one)
        assert a.sup_estimate == 1.0
        assert a.regression_estimate == pytest.approx(1.0)
        assert beta_hat(table_one).sup_estimate == 1.0

    def test_single_path_lower_bound(self, table_sub):
        # the direct geodesic alone gives tau(n, 0) >= p^n
        a = alpha_hat(table_sub)
        assert a.sup_estimate >= 0.3 - 3 * a.sup_stderr

    def test_sup_rule_below_one(self, table_sub):
        assert alpha_hat(table_sub).sup_estimate <= 1.0
        assert beta_hat(table_sub).sup_estimate <= 1.0

    def test_regression_close_to_sup(self, table_sub):
        a = alpha_hat(table_sub)
        assert a.regression_estimate == pytest.approx(a.sup_estimate, abs=0.15)
        n1, n2 = a.window
        assert 1 <= n1 <= n2 <= SPEC.tree_radius

    def test_insufficient_signal(self):
        spec = BallSpec(3, 4, 4)
        # one lucky hit out of four samples: usable window never forms
        t = synthetic_table(spec, {(1, 0): 0.25}, 4)
        with pytest.raises(InsufficientSignal):
            alpha_hat(t)

    def test_fekete_consistency(self, table_sub):
        # every normalized point sits at or below the sup by construction
        a = alpha_hat(table_sub)
        for n in range(1, SPEC.tree_radius + 1):
            tau = table_sub.tau(n, 0)
            if tau > 0:
                assert tau ** (1.0 / n) <= a.sup_estimate + 1e-12


class TestLineSums:
    def test_trivial_p_zero(self, table_zero):
        assert I_hat(table_zero, 0).estimate == 1.0
        assert II_hat(table_zero, 0).estimate == 1.0

    def test_II_dominates_center_square(self, table_sub):
        for n in range(SPEC.tree_radius + 1):
            e = II_hat(table_sub, n)
            assert e.estimate >= table_sub.tau(n, 0) ** 2 - 3 * e.stderr

    def test_I_dominates_II(self, table_sub):
        # tau <= 1 termwise, so the squared sum cannot exceed the plain sum
        for n in range(4):
            assert II_hat(table_sub, n).estimate <= I_hat(table_sub, n).estimate + 1e-12

    def test_truncation_warning_on_wide_tau(self, table_one):
        with pytest.warns(TruncationWarning):
            I_hat(table_one, 0)

    def test_rate_gap_shrinks_with_n(self, table_sub):
        # the line sum decays at the tree rate; its normalized gap to the
        # measured rate narrows as n grows
        a = alpha_hat(table_sub)
        gaps = [
            abs(I_hat(table_sub, n).estimate ** (1.0 / n) - a.sup_estimate)
            for n in range(1, SPEC.tree_radius + 1)
        ]
        assert all(later <= earlier + 1e-9 for earlier, later in zip(gaps, gaps[1:]))


class TestChiTilted:
    def test_level_weight_matches_count_sum(self):
        z = math.sqrt(2.0)
        for n in range(6):
            want = sum(level_count(3, n, l) * z**l for l in range(-n, n + 1, 2))
            assert level_weight(3, n, z) == pytest.approx(want)

    def test_p_zero_gives_one(self, table_zero):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            chi = chi_tilted_hat(table_zero)
        assert chi.estimate == 1.0
        assert chi.tail_bound == 0.0

    def test_p_one_tail_unbounded(self, table_one):
        with pytest.warns(TruncationWarning):
            chi = chi_tilted_hat(table_one)
        assert math.isinf(chi.tail_bound)

    def test_subcritical_finite_tail(self, table_sub):
        chi = chi_tilted_hat(table_sub)
        assert chi.estimate > 1.0
        assert math.isfinite(chi.tail_bound)
        assert chi.tail_bound >= 0.0
        assert chi.tail_rate < 1.0 / math.sqrt(2.0)


class TestChiPlain:
    def test_p_zero(self, table_zero):
        assert chi_plain(table_zero, 3, 5) == 1.0
        assert sum_tau_squared(table_zero, 3, 5) == 1.0

    def test_p_one_counts_box(self, table_one):
        spec_part = BallSpec(3, 2, 3)
        assert chi_plain(table_one, 2, 3) == spec_part.vertex_count

    def test_subrange_validation(self, table_sub):
        with pytest.raises(ValueError):
            chi_plain(table_sub, SPEC.tree_radius + 1, 0)


class TestNabla:
    def test_p_zero_is_one(self, table_zero):
        est = nabla_from_table(table_zero, 2, 3)
        assert est.estimate == 1.0

    def test_p_one_is_box_squared(self, table_one):
        est = nabla_from_table(table_one, 2, 3)
        assert est.estimate == pytest.approx(BallSpec(3, 2, 3).vertex_count ** 2)

    def test_coverage_validation(self, table_sub):
        with pytest.raises(ValueError):
            nabla_from_table(table_sub, SPEC.tree_radius, 1)
        with pytest.raises(ValueError):
            nabla_from_table(table_sub, 1, SPEC.line_halfwidth)

    def test_matches_direct_mc_on_small_box(self):
        # deterministic orbit-sum vs the sampling estimator; p kept low
        # enough that both truncations have converged to the same value
        table = estimate_two_point(0.25, BallSpec(3, 6, 12), 40000, 7)
        via_table = nabla_from_table(table, 3, 6)
        direct = triangle_mc(0.25, BallSpec(3, 3, 6), 40000, 7)
        joint = math.hypot(via_table.stderr, direct.stderr)
        assert abs(via_table.estimate - direct.estimate) <= 3.5 * joint


class TestThresholds:
    def test_pu_inversion_small_budget(self):
        th = p_u_by_alpha_inversion(
            3, tree_radius=4, line_halfwidth=8, samples=1500, base_seed=5,
            tol=0.05, bracket=(0.2, 0.95),
        )
        lo, hi = th.bracket
        assert hi - lo <= 0.05
        assert lo <= th.p_hat <= hi
        assert th.target == pytest.approx(1.0 / math.sqrt(2.0))
        # coupled probes: the measured rate is monotone in p
        by_p = sorted(th.probes)
        rates = [r for _, r, _ in by_p]
        assert rates == sorted(rates)

    def test_pu_bad_bracket(self):
        with pytest.raises(BracketError):
            p_u_by_alpha_inversion(
                3, tree_radius=4, line_halfwidth=8, samples=1500, base_seed=5,
                tol=0.05, bracket=(0.85, 0.95),
            )

    def test_pc_proxy_flags_supercritical(self):
        th = p_c_proxy(
            3, grid=(0.05, 0.6), tree_radius=2, line_halfwidth=4,
            samples=1200, base_seed=9,
        )
        assert th.p_hat == 0.6
        assert th.probes[0][1] < th.probes[1][1]

    def test_pc_proxy_no_crossing(self):
        with pytest.raises(BracketError):
            p_c_proxy(3, grid=(0.02,), tree_radius=2, line_halfwidth=4,
                      samples=800, base_seed=9)
