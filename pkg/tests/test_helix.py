import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helixmax.core import DomainError, G_map, TailFunction, g_map
from helixmax.exact import evolve, step_window
from helixmax.helix import (
    HelixElement,
    cyclic_distance_curve,
    find_limit_point,
    fngg_gaps,
    from_median_anchor,
    from_parameter,
    helix_tail,
    sup_distance,
)

anchors = st.floats(min_value=1e-6, max_value=0.5)


class TestHelixElement:
    def test_anchor_range(self):
        for bad in (0.0, 0.6, -1.0):
            with pytest.raises(DomainError):
                HelixElement(0, bad)

    def test_pointwise(self):
        e = HelixElement(2, 0.3)
        assert helix_tail(e, 2) == 0.3
        assert helix_tail(e, 3) == g_map(0.3)
        assert helix_tail(e, 1) == pytest.approx(G_map(0.3), abs=1e-15)

    @given(anchors, st.integers(-5, 5))
    @settings(max_examples=50)
    def test_sample_matches_pointwise(self, v0, k0):
        e = HelixElement(k0, v0)
        xs = np.arange(k0 - 20, k0 + 20)
        vals, comp = e.sample(xs)
        np.testing.assert_allclose(vals, [helix_tail(e, int(x)) for x in xs], atol=1e-15)
        np.testing.assert_allclose(vals + comp, 1.0, atol=1e-15)
        assert np.all(np.diff(vals) <= 0)

    @given(anchors, st.integers(-5, 5))
    @settings(max_examples=50)
    def test_invariance_equation(self, v0, k0):
        # 4 F(x) = (F(x) + F(x-1))**2
        xs = np.arange(k0 - 40, k0 + 41)
        vals, _ = HelixElement(k0, v0).sample(xs)
        assert np.abs(4 * vals[1:] - (vals[1:] + vals[:-1]) ** 2).max() < 1e-12

    @pytest.mark.parametrize("v0", [0.1, 0.2, 0.3, 0.4, 0.5])
    def test_step_leaves_element_invariant(self, v0):
        e = HelixElement(0, v0)
        xs = np.arange(-40, 41)
        vals, _ = e.sample(xs)
        stepped = step_window(vals, 0.5)
        moved, _ = HelixElement(1, g_map(v0)).sample(xs[1:])
        assert np.abs(stepped - vals[1:]).max() < 1e-12
        assert np.abs(stepped - moved).max() < 1e-12

    def test_shift(self):
        e = HelixElement(0, 0.2).shifted(3)
        assert e.k0 == 3 and e.v0 == 0.2

    def test_extent(self):
        left, right = HelixElement(0, 0.4).extent(1e-14)
        assert left < 0 < right
        assert helix_tail(HelixElement(0, 0.4), right) <= 1e-14


class TestParameter:
    @pytest.mark.parametrize("a", [0.05, 0.2, 0.4, 0.5, 0.7, 0.95])
    def test_value_at_zero(self, a):
        e = from_parameter(a)
        assert helix_tail(e, 0) == pytest.approx(a, abs=1e-14)
        assert helix_tail(e, e.k0 - 1) > 0.5 >= e.v0

    def test_rejects(self):
        for a in (0.0, 1.0, 1.5):
            with pytest.raises(DomainError):
                from_parameter(a)

    def test_median_anchor(self):
        F = evolve(50)
        e = from_median_anchor(F)
        assert F(e.k0 - 1) > 0.5 >= F(e.k0) == e.v0
        with pytest.raises(DomainError):
            from_median_anchor(evolve(0))


class TestDistance:
    def test_zero_on_itself(self):
        # far enough right that the element is 1 at x <= 0 to double precision
        e = HelixElement(12, 0.35)
        xs = np.arange(1, 40)
        vals, comp = e.sample(xs)
        keep = vals > 0
        F = TailFunction(40, vals[keep], comp=comp[keep])
        assert sup_distance(F, e, eps=0.0) < 1e-15

    def test_shift_argument(self):
        e = HelixElement(0, 0.3)
        F = evolve(200)
        k = from_median_anchor(F).k0
        assert sup_distance(F, e, shift=-k) == pytest.approx(sup_distance(F, e.shifted(k)), abs=1e-15)

    def test_nonnegative_and_bounded(self):
        d = sup_distance(evolve(10), HelixElement(1, 0.5))
        assert 0.0 < d <= 1.0 + 1e-14


class TestCyclic:
    def test_small_values(self):
        (pt,) = cyclic_distance_curve([1])
        assert pt.k_n == 1
        assert pt.delta_n == 0.15625

    def test_decreasing(self):
        pts = cyclic_distance_curve([100, 1000, 10_000])
        d = [c.d_n for c in pts]
        dl = [c.delta_n for c in pts]
        assert d[0] > d[1] > d[2] and d[2] < 0.5 * d[0]
        assert dl[0] > dl[1] > dl[2] > 0

    def test_levels_validated(self):
        with pytest.raises(DomainError):
            cyclic_distance_curve([10, 5])
        with pytest.raises(DomainError):
            cyclic_distance_curve([0])

    @pytest.mark.parametrize("n", [1, 2, 7, 64, 999, 5000])
    def test_inequality_suite(self, n):
        first, second = fngg_gaps(evolve(n))
        assert first <= 1e-15 and second <= 1e-15


class TestLimitPoint:
    def test_entries(self):
        rep = find_limit_point(0.2, count=3)
        assert [e.k for e in rep.entries] == [1, 2, 3]
        ns = [e.n_k for e in rep.entries]
        assert ns == sorted(ns) and ns[0] >= 1
        d = [e.distance for e in rep.entries]
        assert d[0] > d[1] > d[2]
        assert rep.monotone()

    def test_half_is_perturbed(self):
        rep = find_limit_point(0.5, count=2)
        assert rep.perturbed and rep.a_used != 0.5

    def test_budget(self):
        from helixmax.core import BudgetExceeded

        with pytest.raises(BudgetExceeded):
            find_limit_point(0.4, count=4, max_level=1000)

    def test_json(self):
        js = find_limit_point(0.7, count=2).as_json()
        assert js["a"] == 0.7 and len(js["entries"]) == 2
