import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE_A, X, Y, Z, constant_system, quads, reference_data
from hvfif import analysis as an
from hvfif.core import ExtendedDataSet, FactorQuad, build_univariate
from hvfif.evaluate import SampleSet, subdivide

# Frozen reference values (computed independently with math.log on the closed forms).
DIM_CONST04 = 1.8390359525563190  # 1 + log_4 3.2
TAU_CONST04 = 0.1609640474436811  # 1 + ln 3.2 / ln(1/4)
DIM_LOW_EXAMPLE_A = 1.4239984532774750  # 1 + log_4 1.8


def brute_force_boxes(samples, eps):
    """Mesh squares met by the polyline through the samples, scanned segment by segment."""
    boxes = set()
    x0 = samples.x[0]
    for a in range(len(samples) - 1):
        col = int(np.floor((0.5 * (samples.x[a] + samples.x[a + 1]) - x0) / eps))
        lo, hi = sorted((samples.f1[a], samples.f1[a + 1]))
        for row in range(int(np.floor(lo / eps)), int(np.floor(hi / eps)) + 1):
            boxes.add((col, row))
    return len(boxes)


class TestBoxCount:
    def test_identity_line(self):
        s = SampleSet.from_function(lambda x: x, count=4097, n_intervals=4)
        assert an.box_count(s, 0.25).count == 8

    def test_constant(self):
        s = SampleSet.from_function(lambda x: 0.3, count=4097, n_intervals=4)
        for k in (1, 2, 3):
            assert an.box_count(s, 4.0 ** -k).count == 4 ** k

    def test_undersampled_column(self):
        s = SampleSet.from_function(lambda x: x, count=17, n_intervals=4)
        with pytest.raises(an.UndersampledError) as info:
            an.box_count(s, 1 / 16)
        assert info.value.index == 0

    def test_misaligned(self):
        s = SampleSet.from_function(lambda x: x, count=4097, n_intervals=4)
        with pytest.raises(an.MisalignedScaleError):
            an.box_count(s, 0.3)

    @given(st.floats(0.0, 0.45), st.integers(2, 4))
    @settings(max_examples=20, deadline=None)
    def test_matches_segment_scan(self, c, k):
        s = subdivide(constant_system(c), k + 2)
        eps = 4.0 ** -k
        assert an.box_count(s, eps).count == brute_force_boxes(s, eps)

    @given(st.floats(0.0, 0.45), st.integers(1, 5))
    @settings(max_examples=20, deadline=None)
    def test_monotone_under_refinement(self, c, k):
        s = subdivide(constant_system(c), 8)
        assert an.box_count(s, 4.0 ** -(k + 1)).count >= an.box_count(s, 4.0 ** -k).count

    def test_monotone_for_binary_mesh(self):
        data = ExtendedDataSet([0, 0.5, 1], [0, 1, 0.2], [0, 0.5, 1])
        h = build_univariate(data, [FactorQuad.constant(0.35)] * 2)
        s = subdivide(h, 14)
        counts = [an.box_count(s, 2.0 ** -k).count for k in range(1, 10)]
        assert counts == sorted(counts)


class TestEmpiricalDimension:
    def test_exact_power_law(self):
        recs = [an.BoxCountRecord(e, round(e ** -1.5)) for e in (4.0 ** -k for k in range(2, 7))]
        fit = an.fit_dimension(recs)
        assert fit.slope == pytest.approx(1.5, abs=1e-3)
        assert fit.stderr < 1e-3

    def test_exact_counts_give_zero_stderr(self):
        recs = [an.BoxCountRecord(2.0 ** -k, 2 ** (2 * k)) for k in range(2, 7)]
        fit = an.fit_dimension(recs)
        assert fit.slope == pytest.approx(2.0, abs=1e-12) and fit.stderr == pytest.approx(0.0, abs=1e-12)

    def test_zero_factors(self, zero_system):
        assert 0.95 <= an.estimate_dimension(zero_system).slope <= 1.05

    def test_constant_04(self, const04):
        assert abs(an.estimate_dimension(const04).slope - DIM_CONST04) <= 0.12

    def test_needs_four_scales(self, const04):
        with pytest.raises(ValueError):
            an.estimate_dimension(const04, (1, 2, 3, 4))

    def test_coarsest_scale_excluded(self, const04):
        fit = an.estimate_dimension(const04, (1, 2, 3, 4, 5))
        assert [r.epsilon for r in fit.records] == [4.0 ** -k for k in (2, 3, 4, 5)]

    @given(st.lists(st.floats(0.0, 0.49), min_size=4, max_size=4))
    @settings(max_examples=15, deadline=None)
    def test_slope_within_graph_range(self, cs):
        h = build_univariate(reference_data(), [FactorQuad.of(c, c, 0.49 - c, 0.49 - c) for c in cs])
        slope = an.estimate_dimension(h).slope
        assert 0.95 <= slope <= 2.0


class TestDimensionBounds:
    def test_example_a(self, example_a):
        r = an.dimension_bounds(example_a)
        assert r.lambda_low == pytest.approx(1.8, abs=1e-12)
        assert r.lambda_up == pytest.approx(4.42, abs=1e-12)
        assert r.case == "a"
        assert r.bound_low == pytest.approx(DIM_LOW_EXAMPLE_A, abs=1e-12)
        assert r.bound_up == 2.0

    def test_collapsed(self, const04):
        r = an.dimension_bounds(const04)
        assert r.bound_low == pytest.approx(DIM_CONST04, abs=1e-12)
        assert r.bound_up == pytest.approx(DIM_CONST04, abs=1e-12)

    def test_case_b(self):
        r = an.dimension_bounds(constant_system(0.05))
        assert r.lambda_up == pytest.approx(0.4) and r.case == "b"
        assert r.bound_low == r.bound_up == 1.0

    def test_inconclusive(self):
        r = an.dimension_bounds(constant_system(0.2))
        assert r.case == "a"
        h = build_univariate(reference_data(), [FactorQuad.of(0.1, 0.4, 0.0, 0.2)] * 4)
        r = an.dimension_bounds(h)
        assert r.lambda_low == pytest.approx(0.4) and r.lambda_up == pytest.approx(2.4)
        assert r.case == "inconclusive" and r.bound_low == 1.0

    def test_hypotheses_hold_for_reference_data(self, const04):
        hyp = an.dimension_bounds(const04).hypothesis
        assert hyp.all_hold and hyp.H * hyp.h > 0

    def test_collinear_data(self):
        data = ExtendedDataSet(X, [1, 2, 3, 4, 5], Z)
        hyp = an.dimension_bounds(build_univariate(data, [FactorQuad.constant(0.4)] * 4)).hypothesis
        assert hyp.triple is None and not hyp.y_noncollinear and not hyp.all_hold

    def test_sign_condition(self):
        h = build_univariate(reference_data(), [FactorQuad.of(0.5, -0.4, 0.1, 0.1)] * 4)
        assert not an.dimension_bounds(h).hypothesis.sign_condition

    def test_non_uniform_flag(self):
        data = ExtendedDataSet([0, 0.2, 0.5, 0.75, 1], Y, Z)
        assert not an.dimension_bounds(build_univariate(data, [FactorQuad.constant(0.1)] * 4)).hypothesis.uniform_nodes

    @given(st.integers(0, 3), st.floats(0.0, 0.1))
    @settings(max_examples=20, deadline=None)
    def test_lambda_up_monotone(self, i, bump):
        base = quads(EXAMPLE_A)
        r0 = an.dimension_bounds(build_univariate(reference_data(), base, strict=False))
        fq = base[i]
        grown = FactorQuad.of(fq.s, fq.s_prime, float(fq.s_tilde(0.0)) + bump, fq.s_tilde_prime)
        r1 = an.dimension_bounds(build_univariate(reference_data(), base[:i] + [grown] + base[i + 1:], strict=False))
        assert r0.lambda_low <= r0.lambda_up
        assert r1.lambda_up >= r0.lambda_up


class TestPerronFrobenius:
    @given(st.lists(st.floats(0.0, 2.0), min_size=2, max_size=12))
    @settings(max_examples=30, deadline=None)
    def test_rank_one_spectral_radius(self, w):
        if sum(w) == 0:
            return
        lam, v = an.power_iteration(an.pf_matrix(w))
        assert lam == pytest.approx(sum(w), abs=1e-10 * max(1.0, sum(w)))
        assert np.allclose(v / v.sum(), np.array(w) / sum(w), atol=1e-8)


class TestSmoothness:
    def test_constant_04_case_three(self, const04):
        sc = an.smoothness_constants(const04, subdivide(const04, 8))
        assert sc.delta == pytest.approx(3.2)
        assert sc.case == "delta_gt_1"
        assert sc.tau1 == pytest.approx(TAU_CONST04, abs=1e-12)
        assert sc.L1 > 0 and sc.tau2 == sc.tau1

    def test_constant_01_lipschitz(self):
        h = constant_system(0.1)
        sc = an.smoothness_constants(h, subdivide(h, 8))
        assert sc.delta == pytest.approx(0.8) and sc.case == "delta_lt_1" and sc.tau1 == 1.0

    def test_zero_factors(self, zero_system):
        sc = an.smoothness_constants(zero_system, subdivide(zero_system, 8))
        assert sc.delta == 0.0 and sc.case == "delta_lt_1" and sc.L1 == pytest.approx(sc.D)

    def test_boundary_case(self):
        h = constant_system(0.125)
        sc = an.smoothness_constants(h, subdivide(h, 8))
        assert sc.case == "delta_eq_1" and sc.alpha == 0.5 and sc.tau1 == 0.5
        assert sc.L1 == pytest.approx(sc.D * (1 + 1 / (0.5 * math.e * math.log(4))))

    def test_sup_norms_inflated(self, const04):
        s = subdivide(const04, 8)
        sc = an.smoothness_constants(const04, s)
        assert sc.sup_f1 == pytest.approx(1.05 * np.max(np.abs(s.f1)))

    def test_hypothesis_violation(self, example_a):
        with pytest.raises(an.HypothesisError, match="0.85"):
            an.smoothness_constants(example_a, subdivide(example_a, 6))

    def test_constant_bound_holds_on_samples(self):
        h = constant_system(0.1)
        s = subdivide(h, 8)
        sc = an.smoothness_constants(h, s)
        dx = np.diff(s.x)
        assert np.all(np.abs(np.diff(s.f1)) <= sc.L1 * dx ** sc.tau1 + 1e-9)


class TestHolder:
    def test_line(self):
        s = SampleSet.from_function(lambda x: x, count=2 ** 14 + 1)
        assert 0.98 <= an.empirical_holder(s).tau <= 1.02

    def test_zero_factors(self, zero_system):
        assert 0.95 <= an.empirical_holder(subdivide(zero_system, 8)).tau <= 1.05

    def test_degenerate(self):
        est = an.empirical_holder(SampleSet.from_function(lambda x: 2.0, count=4097))
        assert est.degenerate and est.tau == 1.0

    def test_constant_04(self, const04):
        s = subdivide(const04, 8)
        tau = an.empirical_holder(s).tau
        assert abs(tau - 0.161) <= 0.08
        assert abs((2 - tau) - an.estimate_dimension(const04, samples=s).slope) <= 0.15


class TestStabilityBounds:
    def test_y_formula(self):
        assert an.stability_formula("y", 0.4, 0.0, dy=0.1) == pytest.approx(0.3)
        assert an.stability_formula("y", 0.4, 0.0, dy=0.0) == 0.0

    def test_all_reduces_to_y(self):
        kw = dict(L1=5.0, L2=5.0, L_q=3.0, L_q_tilde=2.0, tau=0.5)
        a = an.stability_formula("all", 0.3, 0.2, dx=0.0, dy=0.07, dz=0.0, **kw)
        assert a == pytest.approx(an.stability_formula("y", 0.3, 0.2, dy=0.07))

    def test_z_formula_matches_y(self):
        assert an.stability_formula("z", 0.3, 0.1, dz=0.2) == an.stability_formula("y", 0.3, 0.1, dy=0.2)

    def test_x_formula(self):
        got = an.stability_formula("x", 0.2, 0.1, dx=0.01, L1=4.0, L2=3.0, L_q=2.0, L_q_tilde=1.0, tau=0.5)
        assert got == pytest.approx((0.9 * 4 + 0.2 * 3 + 0.9 * 2 + 0.2 * 1) / 0.7 * 0.1)

    def test_requires_sum_below_one(self):
        with pytest.raises(an.HypothesisError):
            an.stability_formula("y", 0.6, 0.5, dy=0.1)

    def test_stability_bound_uses_system_omegas(self, const04):
        assert an.stability_bound("y", const04, dy=0.1) == pytest.approx((1 + 0.8 - 0.4) / 0.2 * 0.1)


class TestStabilityExperiments:
    def test_zero_perturbation(self, const04):
        for kind in ("x", "y", "z", "all"):
            r = an.stability_experiment(const04, const04.data, kind)
            assert r.measured_sup_diff <= 1e-8 and r.satisfied

    @pytest.mark.parametrize("kind", ["x", "y", "z", "all"])
    def test_random_perturbations_within_bound(self, const04, kind):
        reports = an.stability_suite(const04, (kind,), trials=4, magnitude=0.05, seed=3)
        assert all(r.satisfied for r in reports)
        assert all(r.measured_sup_diff <= r.bound for r in reports)

    def test_single_y_node_matches_prediction_sign(self, const04):
        star = const04.data.replace(y=np.array(Y) + np.array([0, 0, 0.1, 0, 0]))
        r = an.stability_experiment(const04, star, "y")
        assert 0 < r.measured_sup_diff <= r.bound

    def test_endpoints_must_stay(self, const04):
        star = const04.data.replace(x=np.array([0.01, 0.25, 0.5, 0.75, 1.0]))
        with pytest.raises(an.HypothesisError):
            an.stability_experiment(const04, star, "x")

    def test_kind_mismatch(self, const04):
        star = const04.data.replace(z=np.array(Z) + 0.1)
        with pytest.raises(ValueError):
            an.stability_experiment(const04, star, "y")

    def test_hypothesis_violation(self, example_a):
        with pytest.raises(an.HypothesisError):
            an.stability_experiment(example_a, example_a.data, "y")

    def test_seeded_suite_is_reproducible(self, const04):
        a = an.stability_suite(const04, ("y",), trials=3, seed=9)
        b = an.stability_suite(const04, ("y",), trials=3, seed=9)
        assert [r.to_dict() for r in a] == [r.to_dict() for r in b]

    def test_remapped_factors_track_nodes(self):
        h = build_univariate(reference_data(), [FactorQuad.of("0.2 + 0.1*x", 0.1, 0.1, 0.1)] * 4)
        x_star = np.array([0.0, 0.3, 0.5, 0.7, 1.0])
        fq = an.remap_factors(h, x_star)
        # s_1* at x_1* equals s_1 at x_1
        assert fq[0].s(0.3) == pytest.approx(h.factors[0].s(0.25))
        assert fq[1].s(0.3) == pytest.approx(h.factors[1].s(0.25))
