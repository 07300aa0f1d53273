import math
from fractions import Fraction

import pytest

from perclab.series import (
    DivergenceReason,
    SeriesDivergence,
    j_closed_form,
    j_enumerate,
    j_region,
    tree_chi,
    tree_triangle_increments,
    tree_triangle_partial,
    tree_two_point,
)


class TestRegion:
    def test_interior_point(self):
        v = j_region(3, 0.3, 1.0)
        assert v.converges and v.reason is DivergenceReason.INSIDE

    def test_r_zero_always_inside(self):
        assert j_region(3, 0.0, 0.001).converges
        assert j_region(3, 0.0, 1000.0).converges

    @pytest.mark.parametrize("d", [3, 4])
    def test_boundary_probes(self, d):
        b = d - 1
        rc = 1.0 / math.sqrt(b)
        eps = 1e-6
        z_mid = 0.5 * (b * rc + 1.0 / rc)
        assert j_region(d, rc - eps, z_mid).converges
        v = j_region(d, rc + eps, z_mid)
        assert not v.converges and v.reason is DivergenceReason.R_TOO_LARGE
        r = 0.5 * rc
        v = j_region(d, r, b * r - eps)
        assert not v.converges and v.reason is DivergenceReason.Z_BELOW_BR
        assert j_region(d, r, b * r + eps).converges
        assert j_region(d, r, 1.0 / r - eps).converges
        v = j_region(d, r, 1.0 / r + eps)
        assert not v.converges and v.reason is DivergenceReason.Z_ABOVE_INV_R

    def test_closed_form_raises_outside(self):
        with pytest.raises(SeriesDivergence) as exc:
            j_closed_form(3, 0.9, 1.0)
        assert exc.value.verdict.reason is DivergenceReason.R_TOO_LARGE

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            j_region(2, 0.1, 1.0)
        with pytest.raises(ValueError):
            j_region(3, -0.1, 1.0)
        with pytest.raises(ValueError):
            j_region(3, 0.1, 0.0)


class TestClosedForm:
    def test_hand_value(self):
        # d=3, r=0.1, z=1: 1/0.9 + 0.2/0.8 + (0.1/0.9)(0.1/0.8) = 1.375
        assert j_closed_form(3, 0.1, 1.0) == pytest.approx(1.375, abs=1e-15)

    def test_r_zero(self):
        assert j_closed_form(4, 0.0, 2.0) == 1.0

    @pytest.mark.parametrize("d", [3, 4])
    def test_matches_enumeration_on_interior_grid(self, d):
        # 5x5 grid strictly inside the region, depth 200, rel err <= 1e-10
        # grid kept strictly interior: both geometric ratios r*z and
        # b*r/z stay below 0.85, so depth 200 resolves 1e-10
        b = d - 1
        rc = 1.0 / math.sqrt(b)
        for i in range(1, 6):
            r = rc * 0.15 * i
            z_lo, z_hi = b * r / 0.85, 0.85 / r
            for j in range(1, 6):
                z = z_lo + (z_hi - z_lo) * j / 6.0
                closed = j_closed_form(d, r, z)
                partial = j_enumerate(d, r, z, 200)[-1]
                assert abs(partial - closed) <= 1e-10 * closed

    def test_exact_enumeration_with_fractions(self):
        r, z = Fraction(1, 10), Fraction(1)
        partials = j_enumerate(3, r, z, 40)
        assert isinstance(partials[-1], Fraction)
        assert float(partials[-1]) == pytest.approx(1.375, rel=1e-12)

    def test_enumeration_monotone(self):
        partials = j_enumerate(3, 0.3, 1.2, 50)
        assert all(b >= a for a, b in zip(partials, partials[1:]))


class TestTreeFunctions:
    def test_two_point_is_geodesic_power(self):
        assert tree_two_point(0.5, 3) == 0.125
        assert tree_two_point(Fraction(1, 2), 3) == Fraction(1, 8)
        with pytest.raises(ValueError):
            tree_two_point(0.5, -1)

    def test_chi_small_p(self):
        # 1 + 3p + 3*2*p^2 + ... = 1 + 3p/(1-2p) for d=3
        assert tree_chi(3, 0.0) == 1.0
        assert tree_chi(3, 0.25) == pytest.approx(1 + 0.75 / 0.5)

    def test_chi_diverges_at_inverse_branching(self):
        with pytest.raises(SeriesDivergence):
            tree_chi(3, 0.5)
        with pytest.raises(SeriesDivergence):
            tree_chi(4, 0.4)


def brute_tree_triangle(d, p, depth):
    # independent double enumeration over the ball, for cross-checking
    from perclab.geometry import sphere_addresses, tree_distance

    addrs = [a for n in range(depth + 1) for a in sphere_addresses(d, n)]
    total = Fraction(0)
    for x in addrs:
        for y in addrs:
            total += p ** (x.depth + tree_distance(x, y) + y.depth)
    return total


class TestTreeTriangle:
    @pytest.mark.parametrize("d,p", [(3, Fraction(3, 10)), (3, Fraction(3, 5)), (4, Fraction(2, 5))])
    def test_partials_match_brute_force(self, d, p):
        partials = tree_triangle_partial(d, p, 4)
        assert partials[-1] == brute_tree_triangle(d, p, 4)

    def test_float_path_matches_exact_path(self):
        exact = tree_triangle_partial(3, Fraction(6, 10), 30)
        fl = tree_triangle_partial(3, 0.6, 30)
        for a, b in zip(exact, fl):
            assert float(a) == pytest.approx(b, rel=1e-12)

    def test_dichotomy_d3(self):
        # convergent side: increments below 1e-6 by depth 80
        inc = tree_triangle_increments(3, 0.6, 80)
        assert inc[80] < 1e-6
        # divergent side: increments do not vanish through depth 200
        inc = tree_triangle_increments(3, 1.0 / math.sqrt(2.0), 200)
        assert inc[200] > 1e-3
        assert min(inc[100:]) > 1e-3

    def test_increments_nonnegative(self):
        assert all(v >= 0 for v in tree_triangle_increments(3, 0.45, 60))

    def test_depth_zero(self):
        assert tree_triangle_partial(3, 0.5, 0) == [1.0]
        assert tree_triangle_partial(3, Fraction(1, 2), 0) == [Fraction(1)]
