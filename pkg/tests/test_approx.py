"""Tests for the adaptive plan, adaptive selection, quadrature and rate studies."""
import math

import numpy as np
import numpy.testing as nptest
import pytest

from besov_lab.approx.adaptive import (
    active_count,
    adaptive_approximate,
    approximation_error,
    approximation_rate_study,
    basis_count,
    choose_level,
    decompose_target,
    finalize_rate_report,
    kept_budget,
    make_plan,
    nonadaptive_approx_exponent,
    select_top,
)
from besov_lab.approx.fitting import fit_loglog_slope, relative_deviation
from besov_lab.approx.quadrature import lr_norm, quadrature_nodes
from besov_lab.errors import ConfigurationError
from besov_lab.models.config import QuadratureSpec
from besov_lab.models.report import STATUS_FITTED, STATUS_NOISE_FLOOR, STATUS_TOO_FEW, RatePoint, RateReport
from besov_lab.models.smoothness import BesovParams, SmoothnessVec
from besov_lab.models.sparse_coeffs import SparseCoeffs
from besov_lab.synth.targets import Target, constant_series, random_series_target


def _tail_series(params, K_deep, rng):
    """Random entries on every level up to K_deep, nonzero and distinct in magnitude."""
    entries = {}
    for k in range(K_deep + 1):
        for j in range(2**k):
            entries[(k, (j,))] = float(rng.uniform(0.1, 1.0)) * float(rng.choice([-1.0, 1.0]))
    return SparseCoeffs.from_entries(params, entries)


class TestPlan:
    def test_tail_budgets(self):
        params = BesovParams(beta=(1.0,), p=1.0, r=2.0, m=1)
        plan = make_plan(2, params)
        assert plan.delta == pytest.approx(0.5)
        assert plan.nu == pytest.approx(0.5)
        assert plan.K_star == 6
        assert plan.N == 4
        # ⌈2^{2 − (k − 2)/2}⌉ for k = 3..6
        assert plan.n_k == {3: 3, 4: 2, 5: 2, 6: 1}
        assert plan.tail_total() == 8
        assert plan.is_adaptive

    def test_budget_lookup(self):
        plan = make_plan(2, BesovParams(beta=(1.0,), p=1.0, r=2.0, m=1))
        assert plan.budget(0) is None
        assert plan.budget(2) is None
        assert plan.budget(4) == 2
        assert plan.budget(7) == 0

    def test_non_adaptive_regime(self):
        plan = make_plan(3, BesovParams(beta=(1.0, 4.0), p=2.0, r=2.0))
        assert plan.K_star == 3
        assert plan.n_k == {}
        assert math.isinf(plan.nu)
        assert plan.summary()["nu"] is None
        assert not plan.is_adaptive

    def test_anisotropic_budget(self):
        plan = make_plan(4, BesovParams(beta=(1.0, 4.0), p=2.0, r=2.0))
        assert plan.norm_K == 5
        assert plan.N == 32

    def test_inadmissible_plan(self):
        with pytest.raises(ConfigurationError):
            make_plan(2, BesovParams(beta=(1.0, 1.0), p=1.0, r=2.0))

    def test_negative_level(self):
        with pytest.raises(ConfigurationError):
            make_plan(-1, BesovParams(beta=(1.0,)))


class TestLevelHelpers:
    @pytest.mark.parametrize("budget, expected", [(1, 0), (2, 1), (16, 3), (31, 3), (32, 4)])
    def test_choose_level(self, budget, expected):
        assert choose_level(budget, SmoothnessVec(beta=(1.0, 4.0))) == expected

    def test_counts(self):
        beta = SmoothnessVec(beta=(1.0,))
        assert active_count(1, beta, 2) == 4
        assert basis_count(1, beta, 2) == 7

    def test_kept_budget(self):
        params = BesovParams(beta=(1.0,), p=1.0, r=2.0, m=1)
        plan = make_plan(2, params)
        assert kept_budget(plan, params.beta, 1) == basis_count(2, params.beta, 1) + 8

    @pytest.mark.parametrize(
        "beta, p, r, expected",
        [((1.0,), 1.0, 2.0, -0.5), ((1.0,), 1.0, math.inf, -0.5), ((1.0, 4.0), 2.0, 2.0, -0.8), ((2.0,), 4.0, 2.0, -2.0)],
    )
    def test_nonadaptive_exponent(self, beta, p, r, expected):
        assert nonadaptive_approx_exponent(SmoothnessVec(beta=beta), p, r) == pytest.approx(expected)


class TestSelection:
    def test_largest_magnitudes(self):
        lin = np.array([0, 1, 2, 3])
        values = np.array([1.0, -3.0, 3.0, 0.0])
        nptest.assert_array_equal(select_top(lin, values, 2), [1, 2])

    def test_ties_go_to_smaller_index(self):
        lin = np.array([0, 1, 2, 3])
        values = np.array([1.0, -3.0, 3.0, 0.0])
        nptest.assert_array_equal(select_top(lin, values, 1), [1])

    def test_zeros_never_selected(self):
        lin = np.array([0, 1, 2, 3])
        values = np.array([1.0, -3.0, 3.0, 0.0])
        nptest.assert_array_equal(select_top(lin, values, 10), [0, 1, 2])
        assert len(select_top(lin, np.zeros(4), 3)) == 0

    def test_adaptive_keeps_a_subset(self, rng):
        params = BesovParams(beta=(1.0,), p=1.0, r=2.0, m=1)
        coeffs = _tail_series(params, 8, rng)
        plan = make_plan(2, params)
        approx = adaptive_approximate(coeffs, plan)
        for (k, j), alpha in approx.items():
            assert coeffs.get(k, j) == alpha
        assert approx.levels == list(range(0, plan.K_star + 1))
        for k in range(plan.K + 1):
            assert len(approx.level_linear(k)[0]) == len(coeffs.level_linear(k)[0])
        for k, n in plan.n_k.items():
            _, kept = approx.level_linear(k)
            _, full = coeffs.level_linear(k)
            assert len(kept) == min(n, len(full))
            assert np.min(np.abs(kept)) >= np.sort(np.abs(full))[::-1][len(kept) - 1]

    def test_empty_tail_restricts(self, rng):
        params = BesovParams(beta=(1.0,), p=2.0, r=2.0, m=1)
        coeffs = _tail_series(params, 5, rng)
        approx = adaptive_approximate(coeffs, make_plan(3, params))
        assert approx.equals(coeffs.restrict(3))


class TestFitting:
    def test_exact_power_law(self):
        N = np.array([4, 8, 16, 32, 64])
        fit = fit_loglog_slope(N, 3.0 * N ** -0.5)
        assert fit.slope == pytest.approx(-0.5)
        assert fit.intercept == pytest.approx(math.log(3.0))
        assert fit.sse == pytest.approx(0.0, abs=1e-20)

    def test_needs_two_budgets(self):
        with pytest.raises(ConfigurationError):
            fit_loglog_slope([8, 8, 8], [0.1, 0.2, 0.3])

    def test_rejects_nonpositive_errors(self):
        with pytest.raises(ConfigurationError):
            fit_loglog_slope([2, 4], [0.1, 0.0])

    def test_relative_deviation(self):
        assert relative_deviation(-0.6, -0.8) == pytest.approx(0.25)

    def test_too_few_points(self):
        report = RateReport(experiment="approx-rate", claim="", exponent_theory=-1.0,
                            points=[RatePoint(N=n, error=1.0 / n) for n in (2, 4, 8)])
        finalize_rate_report(report)
        assert report.status == STATUS_TOO_FEW
        assert report.exponent_fit is None
        assert report.reason


class TestQuadrature:
    def test_grid_nodes(self):
        nodes = quadrature_nodes(2, QuadratureSpec(grid_points=4))
        assert nodes.shape == (16, 2)
        nptest.assert_allclose(np.unique(nodes[:, 0]), [0.125, 0.375, 0.625, 0.875])

    def test_monte_carlo_is_seeded(self):
        quad = QuadratureSpec(kind="mc", n_mc=2000, seed=5)
        nptest.assert_array_equal(quadrature_nodes(4, quad), quadrature_nodes(4, quad))

    def test_norms(self):
        values = np.array([2.0, -2.0, 2.0, -2.0])
        assert lr_norm(values, 2.0).value == pytest.approx(2.0)
        assert lr_norm(values, math.inf).value == 2.0
        assert lr_norm(values, 2.0, monte_carlo=True).stderr == pytest.approx(0.0)

    def test_grid_l2_error_of_a_known_difference(self):
        params = BesovParams(beta=(1.0,), m=1)
        one = SparseCoeffs.from_entries(params, {(0, (0,)): 1.0, (0, (-1,)): 1.0})
        zero = SparseCoeffs(params)
        assert approximation_error(one, zero, 2.0, QuadratureSpec(grid_points=512)) == pytest.approx(1.0)


class TestRateStudy:
    def test_constant_target_is_below_noise_floor(self):
        params = BesovParams(beta=(1.0,), m=2)
        target = Target.from_series(constant_series(1.0, params), kind="constant")
        report = approximation_rate_study(target, [1, 2, 3, 4], params, QuadratureSpec())
        assert report.status == STATUS_NOISE_FLOOR
        assert report.exponent_fit is None
        assert any("non-adaptive" in note for note in report.notes)

    def test_isotropic_slope(self):
        series = random_series_target((1.0,), 2.0, math.inf, 2, 12, seed=11, decay=0.0)
        params = series.params
        report = approximation_rate_study(Target.from_series(series), [3, 4, 5, 6, 7, 8], params,
                                          QuadratureSpec(grid_points=4096))
        assert report.status == STATUS_FITTED
        assert report.exponent_theory == pytest.approx(-1.0)
        assert report.within(0.25)
        assert [pt.N for pt in report.points] == [8, 16, 32, 64, 128, 256]

    def test_worker_count_does_not_change_the_report(self):
        series = random_series_target((1.0, 2.0), 1.0, 1.0, 1, 6, seed=2, decay=0.0)
        params = series.params.with_updates(r=2.0)
        target = Target.from_series(series)
        one = approximation_rate_study(target, [1, 2, 3, 4], params, QuadratureSpec(grid_points=64), jobs=1)
        four = approximation_rate_study(target, [1, 2, 3, 4], params, QuadratureSpec(grid_points=64), jobs=4)
        assert one.to_json() == four.to_json()

    def test_decomposition_must_share_the_basis(self):
        series = random_series_target((1.0,), 2.0, 2.0, 2, 3, seed=0)
        with pytest.raises(ConfigurationError):
            decompose_target(series, BesovParams(beta=(2.0,), m=2), 3, "generated")

    def test_telescoped_decomposition_of_a_function(self):
        params = BesovParams(beta=(1.0,), m=2)
        coeffs = decompose_target(lambda x: x[:, 0] ** 2, params, 2, "auto")
        x = np.linspace(0.0, 1.0, 33)[:, None]
        nptest.assert_allclose(coeffs(x), x[:, 0] ** 2, atol=1e-9)
