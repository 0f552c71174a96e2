import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE_A, EXAMPLE_C, X, Y, Z, constant_system, quads, reference_data
from hvfif.core import (
    ConstructionError,
    ExtendedDataSet,
    FactorBoundError,
    FactorQuad,
    NotContractiveError,
    build_univariate,
    contraction_factor,
    theta_bound,
)
from hvfif.evaluate import ReadBajraktarevic, default_grid


class TestExtendedDataSet:
    def test_valid(self, data):
        assert data.n == 4
        assert data.is_uniform()

    @pytest.mark.parametrize(
        "x, y, z",
        [
            ((0, 0.5, 0.5), (1, 2, 3), (1, 2, 3)),
            ((0, 0.7, 0.5), (1, 2, 3), (1, 2, 3)),
            ((0, 1), (1, 2), (1, 2)),
            ((0, 0.5, 1), (1, 2), (1, 2, 3)),
            ((0, 0.5, 1), (1, math.nan, 3), (1, 2, 3)),
        ],
    )
    def test_rejects(self, x, y, z):
        with pytest.raises(ConstructionError):
            ExtendedDataSet(x, y, z)

    def test_arrays_are_read_only(self, data):
        with pytest.raises(ValueError):
            data.y[0] = 1.0


class TestIntervalMaps:
    def test_endpoints_and_ratio(self, const04):
        for i, L in enumerate(const04.maps, start=1):
            assert L(X[0]) == X[i - 1]
            assert L(X[-1]) == X[i]
            assert L.contraction == pytest.approx(0.25)
            assert L.inverse(L(0.3)) == pytest.approx(0.3)

    def test_reversed_orientation_swaps_endpoints(self, data):
        h = build_univariate(data, [FactorQuad.constant(0.2)] * 4, ["reversed", "forward", "reversed", "forward"])
        L = h.maps[0]
        assert L(X[0]) == X[1] and L(X[-1]) == X[0]
        # corner identities still land on the data, in swapped order
        assert h.rhs_recursion(1, X[0], Y[0], Z[0]) == pytest.approx((Y[1], Z[1]), abs=1e-9)
        assert h.rhs_recursion(1, X[-1], Y[-1], Z[-1]) == pytest.approx((Y[0], Z[0]), abs=1e-9)


class TestBuild:
    def test_example_a_contraction_constant(self, example_a):
        assert example_a.S == pytest.approx(0.99, abs=1e-12)
        assert not example_a.violations

    def test_zero_factors_reduce_q_to_interval_line(self, zero_system):
        xs = np.linspace(0, 1, 33)
        for i in range(1, 5):
            L = zero_system.maps[i - 1]
            expected = np.interp(L(xs), X, Y)
            assert np.allclose(zero_system.q(i, xs), expected, atol=1e-12)

    def test_not_contractive_names_interval(self, data):
        fq = [FactorQuad.of(0.1, 0.9, 0.1, 0.2)] + [FactorQuad.constant(0.1)] * 3
        with pytest.raises(NotContractiveError, match="S >= 1 at interval 1") as info:
            build_univariate(data, fq)
        assert info.value.interval == 1

    def test_factor_sup_at_least_one(self, data):
        fq = [FactorQuad.of("x + 0.5", 0, 0, 0)] * 4
        with pytest.raises(FactorBoundError) as info:
            build_univariate(data, fq)
        assert info.value.interval == 2 and info.value.name == "s"

    def test_factor_count(self, data):
        with pytest.raises(ConstructionError, match="expected 4 factor quadruples, found 3"):
            build_univariate(data, [FactorQuad.constant(0.1)] * 3)

    def test_rejects_bivariate_factor(self, data):
        with pytest.raises(ConstructionError, match="variable y"):
            build_univariate(data, [FactorQuad.of("x*y", 0, 0, 0)] * 4)

    def test_example_c_violations_are_reported(self):
        with pytest.raises(ConstructionError):
            build_univariate(reference_data(), quads(EXAMPLE_C))
        h = build_univariate(reference_data(), quads(EXAMPLE_C), strict=False)
        kinds = {(type(v).__name__, v.interval) for v in h.violations}
        assert ("FactorBoundError", 2) in kinds  # |cos(30x)| reaches 1 on [0.25, 0.5]
        assert ("FactorBoundError", 4) in kinds  # x reaches 1 at the right end
        assert ("NotContractiveError", 1) in kinds  # 0.725 + 0.9 on the first interval

    @given(st.integers(0, 3), st.sampled_from(["s", "s_prime", "s_tilde", "s_tilde_prime"]),
           st.floats(0.0, 0.3))
    @settings(max_examples=25, deadline=None)
    def test_reported_S_is_monotone_in_factor_sup(self, i, name, bump):
        base = quads(EXAMPLE_A)
        h0 = build_univariate(reference_data(), base, strict=False)
        fq = base[i]
        old = getattr(fq, name)
        bigger = FactorQuad.of(*[f"{float(old(0.0)) + bump}" if n == name else getattr(fq, n)
                                 for n in FactorQuad.NAMES])
        h1 = build_univariate(reference_data(), base[:i] + [bigger] + base[i + 1:], strict=False)
        assert h1.S >= h0.S


class TestContractionReport:
    def test_uniform_ratio(self, const04):
        assert const04.contraction.c_L == pytest.approx(0.25)
        assert const04.contraction.L_S == 0.0

    def test_theta_formula(self):
        assert theta_bound(0.25, 0.0, 123.0, 100.0) == pytest.approx(0.0075)
        assert math.isinf(theta_bound(0.25, 0.0, 1.0, 0.0))

    def test_collinear_zero_factors_contract(self):
        data = ExtendedDataSet(X, [1.0, 2.0, 3.0, 4.0, 5.0], [0.0, 1.0, 2.0, 3.0, 4.0])
        h = build_univariate(data, [FactorQuad.constant(0.0)] * 4)
        r = h.contraction
        assert r.theta_max > 0
        assert contraction_factor(r.theta_max / 2, r.c_L, r.L_S, r.kappa, r.L_Q, r.S) < 1
        assert r.c_at_half_theta < 1

    def test_box_contains_attractor(self, example_a):
        from hvfif.evaluate import subdivide

        s = subdivide(example_a, 6)
        (ylo, yhi), (zlo, zhi) = example_a.contraction.box
        assert example_a.contraction.box_verified
        assert ylo <= s.f1.min() and s.f1.max() <= yhi
        assert zlo <= s.f2.min() and s.f2.max() <= zhi


def _direct_rhs(i, xi, a, b):
    """Independent expansion of the recursion for the EXAMPLE_A factor table."""
    s = [0.3, 0.85, 0.8, 0.5][i - 1]
    sp = [0.8, 0.6, 0.4, 0.5][i - 1]
    stp = [0.19, 0.37, 0.48, 0.43][i - 1]
    x0, x1 = X[i - 1], X[i]
    X_ = x0 + (x1 - x0) * xi
    g = Y[0] + (Y[-1] - Y[0]) * xi
    gp = Z[0] + (Z[-1] - Z[0]) * xi
    h = Y[i - 1] + (Y[i] - Y[i - 1]) * (X_ - x0) / (x1 - x0)
    ht = Z[i - 1] + (Z[i] - Z[i - 1]) * (X_ - x0) / (x1 - x0)
    q = -s * g - sp * gp + h
    qt = -0.0 * g - stp * gp + ht
    return s * a + sp * b + q, 0.0 * a + stp * b + qt


class TestRecursion:
    def test_left_endpoint(self, example_a):
        assert example_a.rhs_recursion(1, X[0], Y[0], Z[0]) == pytest.approx((Y[0], Z[0]), abs=1e-12)

    def test_zero_factors(self, zero_system):
        for i in range(1, 5):
            L = zero_system.maps[i - 1]
            f1, f2 = zero_system.rhs_recursion(i, 0.37, 123.0, -7.0)
            assert f1 == pytest.approx(np.interp(L(0.37), X, Y), abs=1e-12)
            assert f2 == pytest.approx(np.interp(L(0.37), X, Z), abs=1e-12)

    @given(st.integers(1, 4), st.floats(0, 1), st.floats(-100, 100), st.floats(-100, 100))
    @settings(max_examples=200, deadline=None)
    def test_matches_direct_expansion(self, example_a, i, xi, a, b):
        got = example_a.rhs_recursion(i, xi, a, b)
        want = _direct_rhs(i, xi, a, b)
        assert got == pytest.approx(want, abs=1e-12 * (1 + abs(a) + abs(b) + 50))

    def test_index_out_of_range(self, example_a):
        with pytest.raises(IndexError):
            example_a.rhs_recursion(5, 0.5, 0.0, 0.0)
        with pytest.raises(IndexError):
            example_a.rhs_recursion(0, 0.5, 0.0, 0.0)

    def test_corner_identities_all_intervals(self, example_a):
        for i in range(1, 5):
            assert example_a.rhs_recursion(i, X[0], Y[0], Z[0]) == pytest.approx((Y[i - 1], Z[i - 1]), abs=1e-9)
            assert example_a.rhs_recursion(i, X[-1], Y[-1], Z[-1]) == pytest.approx((Y[i], Z[i]), abs=1e-9)


def random_interpolants(h, grid, rng):
    """Piecewise-linear functions through the data with random interior vertices."""
    knots = np.union1d(h.data.x, rng.uniform(h.data.x[0], h.data.x[-1], 12))
    v1 = np.interp(knots, h.data.x, h.data.y) + rng.normal(0, 10, len(knots))
    v2 = np.interp(knots, h.data.x, h.data.z) + rng.normal(0, 2, len(knots))
    node = np.isin(knots, h.data.x)
    v1[node] = h.data.y
    v2[node] = h.data.z
    return np.interp(grid, knots, v1), np.interp(grid, knots, v2)


@pytest.mark.parametrize("c", [0.0, 0.4, 0.45])
def test_discretised_operator_contracts(c, rng):
    h = constant_system(c)
    grid = default_grid(h, 1025)
    T = ReadBajraktarevic(h, grid)
    for _ in range(50):
        a = random_interpolants(h, grid, rng)
        b = random_interpolants(h, grid, rng)
        ta, tb = T(*a), T(*b)
        lhs = np.max(np.abs(ta[0] - tb[0]) + np.abs(ta[1] - tb[1]))
        rhs = h.S * np.max(np.abs(a[0] - b[0]) + np.abs(a[1] - b[1]))
        assert lhs <= rhs + 1e-9
