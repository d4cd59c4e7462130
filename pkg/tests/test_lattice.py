import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qp2d.lattice import (
    ApproxPair,
    LatticeIndex,
    QPParams,
    RationalAlpha,
    ZERO_INDEX,
    best_rational,
    cluster_decompose,
    count_short_vectors,
    cross_combination,
    dual_vector,
    duals_colinear,
    enumerate_box,
    enumerate_box_array,
    min_dual_norm_constant,
    primitive_direction,
    rational_ratio,
    triple_norm,
    triple_norm_array,
)

TWO_PI = 2.0 * math.pi

coord = st.integers(min_value=-6, max_value=6)
indices = st.builds(
    LatticeIndex,
    st.tuples(coord, coord),
    st.tuples(coord, coord),
)


class TestDualVector:
    def test_zero_index(self, params):
        dv = dual_vector(ZERO_INDEX, params)
        assert dv.p[0] == 0.0 and dv.p[1] == 0.0 and dv.norm3 == 0

    def test_alpha_free_component(self, params):
        dv = dual_vector(LatticeIndex((1, 0), (0, 0)), params)
        assert dv.p[0] == pytest.approx(TWO_PI, abs=0) and dv.p[1] == 0.0
        assert dv.norm3 == 1

    def test_high_precision_value(self, params):
        # alpha = sqrt(2)-1, m = ((-1,0),(1,0)): 2*pi*(sqrt(2)-2)
        dv = dual_vector(LatticeIndex((-1, 0), (1, 0)), params)
        expected = TWO_PI * (float(Fraction(math.isqrt(2 << 200), 1 << 100)) - 2.0)
        assert dv.p[0] == pytest.approx(expected, abs=1e-12)
        assert abs(dv.p[0] - (-3.680605)) < 1e-5
        assert dv.p[1] == 0.0

    def test_two_sided_norm_bounds(self, params):
        # |p_m| <= 2*pi*sqrt(2)*|||m||| (the sqrt(2) is the cost of the
        # inf-norm convention on components) and
        # |p_m| >= 2*pi*C*|||m|||^-mu with C measured once for this alpha
        c1 = min_dual_norm_constant(params, radius=6)
        assert c1 > 0
        rows = enumerate_box_array(6)
        norms = triple_norm_array(rows)
        for row, n in zip(rows[norms > 0], norms[norms > 0]):
            dv = dual_vector(LatticeIndex.from_row(row), params)
            assert dv.length <= TWO_PI * math.sqrt(2.0) * n + 1e-9
            assert dv.length >= TWO_PI * c1 * float(n) ** (-params.mu) - 1e-9


class TestTripleNorm:
    @pytest.mark.parametrize(
        "m,expected",
        [
            (ZERO_INDEX, 0),
            (LatticeIndex((1, 0), (0, 0)), 1),
            (LatticeIndex((2, -1), (0, 3)), 5),
        ],
    )
    def test_examples(self, m, expected):
        assert triple_norm(m) == expected

    @given(indices, indices)
    @settings(max_examples=200, deadline=None)
    def test_triangle_inequality(self, a, b):
        assert triple_norm(a + b) <= triple_norm(a) + triple_norm(b)

    @given(indices)
    @settings(max_examples=100, deadline=None)
    def test_symmetry(self, m):
        assert triple_norm(m) == triple_norm(-m)


class TestEnumerateBox:
    def test_radius_zero(self):
        assert enumerate_box(0) == [ZERO_INDEX]

    def test_radius_one_count(self):
        assert len(enumerate_box(1)) == 17

    @pytest.mark.parametrize("radius", [0, 1, 2, 3])
    def test_coordinate_bound(self, radius):
        assert len(enumerate_box(radius)) <= (2 * radius + 1) ** 4

    def test_nesting_and_determinism(self):
        small = enumerate_box(2)
        large = enumerate_box(3)
        assert set(small) <= set(large)
        assert small == sorted(small)
        assert enumerate_box(2) == small

    def test_brute_force_oracle(self):
        # independent four-fold loop
        radius = 2
        expected = []
        r = range(-radius, radius + 1)
        for a in r:
            for b in r:
                for c in r:
                    for d in r:
                        if max(abs(a), abs(b)) + max(abs(c), abs(d)) <= radius:
                            expected.append(LatticeIndex((a, b), (c, d)))
        assert sorted(expected) == enumerate_box(radius)


class TestBestRational:
    def test_golden_gives_fibonacci(self, golden):
        ap = best_rational(golden, k=20.0, r=1.0)
        fibs = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]
        assert ap.q in fibs
        assert -ap.p in fibs
        assert math.gcd(ap.q, abs(ap.p)) == 1

    def test_two_sided_bound(self, params):
        for k, r in [(15.0, 0.6), (25.0, 0.8), (40.0, 1.0), (60.0, 1.0)]:
            ap = best_rational(params, k, r)
            assert abs(ap.eps_q) <= 0.25 / (ap.q * k**r) + 1e-15
            assert abs(ap.eps_q) >= k ** (-2 * r * params.mu)

    def test_dirichlet_existence(self):
        # whenever the window exceeds a convergent denominator, the next
        # denominator bounds the error below the threshold, so the search
        # always succeeds on genuine inputs
        for prefix in ([0, 1, 1, 1, 1, 1, 1, 1, 1], [0, 7, 2, 9, 1, 1, 3, 1]):
            p = QPParams(cf_prefix=prefix, mu=2.0)
            for k, r in [(2.0, 0.5), (10.0, 1.0), (60.0, 1.0)]:
                ap = best_rational(p, k, r)
                assert 0 < ap.q <= 4 * k**r
                assert abs(ap.q * p.alpha_fraction + ap.p) <= 0.25 * k**-r

    def test_dirichlet_window(self, params):
        # any window wide enough to contain a convergent returns one
        ap = best_rational(params, 40.0, 1.0)
        nums = dict((den, num) for num, den in params.convergents())
        assert ap.q in nums and ap.p == -nums[ap.q]


class TestClusterDecompose:
    def test_q_one_single_residue(self, params):
        box = enumerate_box(2)
        ap = ApproxPair(q=1, p=0, eps_q=params.alpha)
        grid = cluster_decompose(box, ap, params)
        assert all(key[1] == (0, 0) for key in grid.clusters)

    def test_partition(self, params):
        box = enumerate_box(3)
        ap = best_rational(params, 15.0, 0.8)
        grid = cluster_decompose(box, ap, params)
        members = [m for v in grid.clusters.values() for m in v]
        assert sorted(members) == sorted(box)

    def test_separation_under_hypothesis(self):
        # alpha with a huge partial quotient makes eps_q small enough for
        # the separation statement's hypothesis
        p = QPParams(cf_prefix=[0, 3, 300, 2, 1, 1, 1, 1], mu=2.0)
        k, r = 15.0, 0.6
        ap = best_rational(p, k, r)
        assert abs(ap.eps_q) <= (1.0 / 64.0) / (ap.q * k**r), "hypothesis"
        grid = cluster_decompose(enumerate_box(6), ap, p)
        assert grid.cluster_diameter < 1.0 / (8 * ap.q)
        assert grid.min_separation > 1.0 / (2 * ap.q)


class TestCountShortVectors:
    def test_zero_below_minimum(self, params):
        rows = enumerate_box_array(4)
        norms = triple_norm_array(rows)
        from qp2d.lattice import dual_array

        lengths = np.linalg.norm(dual_array(rows[norms > 0], params), axis=1)
        assert count_short_vectors(4, 0.5 * float(lengths.min()), params) == 0

    def test_matches_brute_force(self, params):
        radius, thr = 5, 1.3
        rows = enumerate_box_array(radius)
        norms = triple_norm_array(rows)
        from qp2d.lattice import dual_array

        lengths = np.linalg.norm(dual_array(rows, params), axis=1)
        expected = int(np.sum((lengths < thr) & (norms > 0)))
        assert count_short_vectors(radius, thr, params) == expected

    @pytest.mark.parametrize("k,r", [(15.0, 0.6), (25.0, 0.8), (40.0, 1.0)])
    def test_counting_bounds(self, params, k, r):
        ap = best_rational(params, k, r)
        box_radius = int(2 * k**r)
        n2 = count_short_vectors(
            box_radius, abs(ap.eps_q) * ap.q * k ** (r / 3.0), params
        )
        assert n2 <= k ** (2 * r / 3.0)
        if ap.q > k ** (2 * r / 3.0):
            n3 = count_short_vectors(box_radius, k ** (-2 * r / 3.0), params)
            assert n3 <= 2**12 * k ** (2 * r / 3.0)


class TestExactArithmetic:
    def test_rational_alpha_rejected(self):
        with pytest.raises(RationalAlpha):
            QPParams(quadratic=(1, 0, 2, 3))
        with pytest.raises(RationalAlpha):
            QPParams(quadratic=(0, 1, 4, 3))  # d = 4 is a perfect square

    def test_minimal_triple(self, params):
        n1, n2, n3 = params.minimal_triple()
        a = params.alpha
        assert abs(n1 + n2 * a + n3 * a * a) < 1e-12
        assert params.combination_is_zero(n1, n2, n3)
        assert not params.combination_is_zero(n1 + 1, n2, n3)

    def test_colinearity(self, params):
        m = LatticeIndex((1, 0), (0, 0))
        assert duals_colinear(m, LatticeIndex((3, 0), (0, 0)), params)
        assert duals_colinear(m, LatticeIndex((0, 0), (2, 0)), params)
        assert not duals_colinear(m, LatticeIndex((1, 1), (0, 0)), params)
        # the cross combination is integer-exact
        assert cross_combination(m, LatticeIndex((0, 0), (2, 0))) == (0, 0, 0)
        assert cross_combination(m, LatticeIndex((0, 1), (0, 0))) == (1, 0, 0)
        assert cross_combination(m, LatticeIndex((0, 0), (0, 3))) == (0, 3, 0)

    def test_rational_ratio(self):
        m = LatticeIndex((1, -2), (3, 0))
        assert rational_ratio(m, m.scale(3)) == 3
        assert rational_ratio(m.scale(2), m.scale(3)) == Fraction(3, 2)
        assert rational_ratio(m, LatticeIndex((1, -2), (3, 1))) is None

    def test_primitive_direction(self):
        assert primitive_direction(LatticeIndex((2, 4), (-2, 0))) == LatticeIndex(
            (1, 2), (-1, 0)
        )
        with pytest.raises(ValueError):
            primitive_direction(ZERO_INDEX)


@given(indices, indices)
@settings(max_examples=150, deadline=None)
def test_dual_map_is_additive(a, b):
    params = QPParams(quadratic=(-1, 1, 2, 1), mu=2.0)
    da = dual_vector(a, params).p
    db = dual_vector(b, params).p
    dab = dual_vector(a + b, params).p
    assert np.allclose(da + db, dab, atol=1e-9)
