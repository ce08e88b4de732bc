import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helixmax.core import (
    DomainError,
    G_map,
    JointPmf,
    LatticePmf,
    TailFunction,
    g_map,
    iterate_map,
    read_tail_csv,
    tail_csv_text,
)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def _tol(y):
    # g has slope (1 - u)**-1/2 near u = 1, so rounding an intermediate u costs
    # ~eps / sqrt(1 - u); with u = G(y) that is ~eps / (1 - y)
    return 1e-12 + 1e-15 / max(y * (1.0 - y), 1e-300)


class TestMaps:
    def test_fixed_points(self):
        assert g_map(0.0) == 0.0 and g_map(1.0) == 1.0
        assert G_map(0.0) == 0.0 and G_map(1.0) == 1.0

    def test_known_values(self):
        assert g_map(0.75) == pytest.approx(0.25)
        assert G_map(0.25) == pytest.approx(0.75)
        assert g_map(0.5) == pytest.approx(2 - 0.5 - 2 * math.sqrt(0.5))

    @given(unit)
    def test_inverse_pair(self, y):
        assert abs(G_map(g_map(y)) - y) < _tol(y)
        assert abs(g_map(G_map(y)) - y) < _tol(y)

    @given(unit)
    def test_duality(self, y):
        assert abs(g_map(1.0 - y) - (1.0 - G_map(y))) < _tol(y)

    def test_grid_identities(self):
        y = np.linspace(0.0, 1.0, 1000)
        assert np.abs(G_map(g_map(y)) - y).max() < 1e-12
        assert np.abs(g_map(G_map(y)) - y).max() < 1e-12
        assert np.abs(g_map(1.0 - y) - (1.0 - G_map(y))).max() < 1e-12

    @given(unit, unit)
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert g_map(lo) <= g_map(hi)
        assert G_map(lo) <= G_map(hi)

    @given(st.floats(min_value=1e-300, max_value=1e-3))
    def test_small_arguments_keep_relative_precision(self, y):
        # g(y) = y^2 / 4 + O(y^3)
        assert g_map(y) == pytest.approx(y * y / 4.0, rel=2e-3)

    def test_array_matches_scalar(self):
        ys = np.linspace(0.0, 1.0, 101)
        np.testing.assert_array_equal(g_map(ys), [g_map(float(y)) for y in ys])
        np.testing.assert_array_equal(G_map(ys), [G_map(float(y)) for y in ys])

    def test_rejects_out_of_domain(self):
        with pytest.raises(DomainError):
            g_map(1.5)
        with pytest.raises(DomainError):
            G_map(-0.1)
        with pytest.raises(DomainError):
            G_map(float("nan"))

    def test_iterate(self):
        assert iterate_map("g", 0.3, 0) == 0.3
        assert iterate_map("G", iterate_map("g", 0.3, 5), 5) == pytest.approx(0.3, abs=1e-12)
        with pytest.raises(DomainError):
            iterate_map("h", 0.3, 1)


class TestTailFunction:
    def test_implicit_ends(self):
        F = TailFunction(2, [0.390625, 0.015625])
        assert F(0) == 1.0 and F(-5) == 1.0 and F(3) == 0.0
        assert F.complement(1) == pytest.approx(0.609375)
        np.testing.assert_array_equal(F.tail([0, 1, 2, 3]), [1.0, 0.390625, 0.015625, 0.0])

    def test_pmf_sums_to_one(self):
        F = TailFunction(2, [0.390625, 0.015625])
        np.testing.assert_allclose(F.pmf(), [0.609375, 0.375, 0.015625])
        assert F.pmf().sum() == pytest.approx(1.0)

    def test_trailing_zeros_trimmed(self):
        assert TailFunction(5, [0.5, 0.1, 0.0, 0.0]).hi == 2

    @pytest.mark.parametrize(
        "values",
        [[0.2, 0.5], [1.2], [-0.1], [float("nan")]],
    )
    def test_invalid(self, values):
        with pytest.raises(DomainError):
            TailFunction(3, values)

    def test_support_bound(self):
        with pytest.raises(DomainError):
            TailFunction(1, [0.5, 0.25])

    def test_read_only(self):
        F = TailFunction(2, [0.5, 0.25])
        with pytest.raises(ValueError):
            F.values[0] = 0.1

    def test_csv_round_trip(self, tmp_path):
        F = TailFunction(3, [0.7, 1.0 / 3.0, 1e-200], p=0.6)
        path = tmp_path / "f.csv"
        F.to_csv(path, ["note"])
        G = read_tail_csv(path)
        assert G.n == 3 and G.p == 0.6
        np.testing.assert_array_equal(G.values, F.values)
        assert tail_csv_text(F).splitlines()[-3:] == ["1,0.7", "2,0.3333333333333333", "3,1e-200"]


class TestLatticePmf:
    def test_sorted_and_span(self):
        pmf = LatticePmf((3, -1, 1), (0.2, 0.5, 0.3))
        assert pmf.support == (-1, 1, 3)
        assert pmf.lo == -1 and pmf.omega == 3 and pmf.span == 2
        np.testing.assert_allclose(pmf.dense(), [0.5, 0, 0.3, 0, 0.2])

    def test_bernoulli(self):
        pmf = LatticePmf.bernoulli01(0.3)
        assert pmf.as_dict() == {0: 0.7, 1: 0.3}
        assert pmf.span == 1

    @pytest.mark.parametrize(
        "support,probs",
        [((), ()), ((0, 1), (0.5,)), ((0, 1), (0.6, 0.6)), ((0, 0), (0.5, 0.5)), ((0, 1), (1.0, 0.0))],
    )
    def test_invalid(self, support, probs):
        with pytest.raises(DomainError):
            LatticePmf(support, probs)


class TestJointPmf:
    def test_marginals(self):
        m = np.array([[0.5, 0.25], [0.0, 0.25]])
        J = JointPmf(1, 2, m)
        assert J.total() == 1.0
        np.testing.assert_array_equal(J.marginal_max(), [0.75, 0.25])
        np.testing.assert_array_equal(J.marginal_count(), [0.5, 0.5])
        assert J.as_dict() == {(0, 1): 0.5, (0, 2): 0.25, (1, 2): 0.25}

    def test_shape_and_sign(self):
        with pytest.raises(DomainError):
            JointPmf(1, 3, np.zeros((2, 2)))
        with pytest.raises(DomainError):
            JointPmf(1, 2, -np.ones((2, 2)))
