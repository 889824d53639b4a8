"""Tests for ReLU network algebra, gadgets, synthesis and architecture budgets."""
import math
from fractions import Fraction

import numpy as np
import numpy.testing as nptest
import pytest

from besov_lab.approx.adaptive import make_plan
from besov_lab.errors import ConfigurationError, SynthesisError
from besov_lab.models.smoothness import BesovParams
from besov_lab.models.sparse_coeffs import SparseCoeffs
from besov_lab.relu.budgets import (
    DeepStage,
    affine_budget,
    budget_certificate,
    covering_number_bound,
    deep_budget,
    gadget_budget,
    magnitude_exponent,
    unit_depth,
    unit_width,
)
from besov_lab.relu.gadgets import (
    Approximant,
    assemble_approximant,
    build_bspline_net,
    exact_tensor_bspline,
    min_network,
    multiply_error_bound,
    multiply_network,
    power_network,
    square_error_bound,
    square_network,
    univariate_bspline_network,
    verify_approximant,
)
from besov_lab.relu.network import (
    ReluNetwork,
    affine_network,
    clip_network,
    clip_unit_network,
    compose_with_clipping,
    identity_network,
    parallel,
    precompose_affine,
    sequential,
    stack_nonnegative,
    zero_network,
)


def _small_net():
    return ReluNetwork([
        (np.array([[1.0, 0.0, -2.0], [0.0, 0.5, 0.0]]), np.array([0.0, 1.0])),
        (np.array([[3.0, -1.0]]), np.array([0.25])),
    ])


class TestNetworkStats:
    def test_stats_are_recounted(self):
        stats = _small_net().stats
        assert (stats.L, stats.W, stats.S, stats.B) == (2, 3, 7, 3.0)

    def test_forward_pass(self):
        net = _small_net()
        x = np.array([[1.0, 2.0, 0.25], [0.0, 0.0, 1.0]])
        # hidden: η(x1 − 2x3), η(x2/2 + 1)
        expected = 3.0 * np.maximum(x[:, 0] - 2.0 * x[:, 2], 0.0) - np.maximum(0.5 * x[:, 1] + 1.0, 0.0) + 0.25
        nptest.assert_allclose(net.scalar(x), expected)
        nptest.assert_allclose(net(x[0]), expected[:1])

    def test_layers_must_chain(self):
        with pytest.raises(ConfigurationError):
            ReluNetwork([(np.ones((2, 3)), np.zeros(2)), (np.ones((1, 3)), np.zeros(1))])

    def test_input_dimension_checked(self):
        with pytest.raises(ConfigurationError):
            _small_net().evaluate(np.ones((4, 2)))

    def test_json_keeps_weights(self):
        net = _small_net()
        again = ReluNetwork.from_json(net.to_json())
        assert again.stats == net.stats
        for (w1, b1), (w2, b2) in zip(net.layers, again.layers):
            nptest.assert_array_equal(w1, w2)
            nptest.assert_array_equal(b1, b2)

    def test_tampered_stats_rejected(self):
        payload = _small_net().to_dict()
        payload["stats"]["S"] = 5
        with pytest.raises(ConfigurationError):
            ReluNetwork.from_dict(payload)


class TestNetworkAlgebra:
    def test_identity_at_any_depth(self, rng):
        x = rng.standard_normal((20, 3))
        for depth in (1, 2, 4):
            net = identity_network(3, depth)
            assert net.depth == depth
            nptest.assert_allclose(net(x), x)

    def test_clips(self):
        t = np.array([[-1.0], [0.3], [2.0]])
        nptest.assert_allclose(clip_unit_network()(t)[:, 0], [0.0, 0.3, 1.0])
        nptest.assert_allclose(clip_network(1.5)(np.array([[-4.0], [0.7], [9.0]]))[:, 0], [-1.5, 0.7, 1.5])
        with pytest.raises(ConfigurationError):
            clip_network(0.0)

    def test_sequential_merges_boundary_maps(self, rng):
        inner = _small_net()
        outer = ReluNetwork([(np.array([[2.0], [-1.0]]), np.zeros(2)), (np.array([[1.0, 1.0]]), np.zeros(1))])
        net = sequential(inner, outer)
        assert net.depth == inner.depth + outer.depth - 1
        x = rng.standard_normal((30, 3))
        nptest.assert_allclose(net(x), outer(inner(x)), atol=1e-12)

    def test_stack_nonnegative_adds_depths(self, rng):
        inner = clip_unit_network(2)
        outer = affine_network(np.array([[1.0, -1.0]]))
        net = stack_nonnegative(inner, outer)
        assert net.depth == 3
        x = rng.standard_normal((30, 2))
        nptest.assert_allclose(net(x), outer(inner(x)), atol=1e-12)

    def test_parallel_shared_and_split(self, rng):
        a = clip_unit_network(1)
        b = affine_network(np.array([[2.0]]), np.array([1.0]))
        x = rng.standard_normal((25, 1))
        shared = parallel([a, b], shared_input=True)
        assert shared.depth == 2
        nptest.assert_allclose(shared(x), np.hstack([a(x), b(x)]), atol=1e-12)
        y = rng.standard_normal((25, 2))
        split = parallel([a, b], shared_input=False)
        nptest.assert_allclose(split(y), np.hstack([a(y[:, :1]), b(y[:, 1:])]), atol=1e-12)

    def test_precompose_keeps_depth(self, rng):
        net = _small_net()
        A = rng.standard_normal((3, 2))
        shift = np.array([0.5, -0.25, 1.0])
        composed = precompose_affine(net, A, shift)
        assert composed.depth == net.depth
        x = rng.standard_normal((15, 2))
        nptest.assert_allclose(composed(x), net(x @ A.T + shift), atol=1e-12)

    def test_clipped_composition(self, rng):
        first = affine_network(np.array([[3.0]]), np.array([-1.0]))
        second = affine_network(np.array([[-2.0]]), np.array([1.5]))
        net = compose_with_clipping([first, second])
        assert net.depth == (first.depth + 1) + (second.depth + 1)
        x = rng.random((40, 1))
        inner = np.clip(3.0 * x - 1.0, 0.0, 1.0)
        nptest.assert_allclose(net(x), np.clip(-2.0 * inner + 1.5, 0.0, 1.0), atol=1e-12)

    def test_zero_network(self):
        nptest.assert_array_equal(zero_network(3)(np.ones((4, 3))), 0.0)


class TestGadgets:
    @pytest.mark.parametrize("s", [0, 1, 3, 6])
    def test_square_error(self, s):
        x = np.linspace(0.0, 1.0, 1025)[:, None]
        error = np.max(np.abs(square_network(s).scalar(x) - x[:, 0] ** 2))
        assert error <= square_error_bound(s) + 1e-12

    def test_square_exact_on_dyadic_points(self):
        x = (np.arange(9) / 8.0)[:, None]
        nptest.assert_allclose(square_network(3).scalar(x), x[:, 0] ** 2, atol=1e-14)

    @pytest.mark.parametrize("s", [2, 5])
    def test_multiply_error(self, rng, s):
        xy = rng.random((500, 2))
        error = np.max(np.abs(multiply_network(s).scalar(xy) - xy[:, 0] * xy[:, 1]))
        assert error <= multiply_error_bound(s) + 1e-12

    def test_multiply_clamps_inputs(self):
        value = multiply_network(8).scalar(np.array([[2.0, -1.0], [3.0, 3.0]]))
        nptest.assert_allclose(value, [0.0, 1.0], atol=multiply_error_bound(8))

    def test_power(self):
        z = np.linspace(0.0, 1.0, 101)[:, None]
        nptest.assert_allclose(power_network(3, 10).scalar(z), z[:, 0] ** 3, atol=1e-5)
        with pytest.raises(ConfigurationError):
            power_network(0, 3)

    def test_min_tree_is_exact(self, rng):
        x = rng.standard_normal((50, 5))
        nptest.assert_allclose(min_network(5).scalar(x), x.min(axis=1), atol=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_univariate_unit(self, m):
        x = np.linspace(-0.5, m + 1.5, 301)[:, None]
        exact = exact_tensor_bspline(m, x)
        nptest.assert_allclose(univariate_bspline_network(m, 14).scalar(x), exact, atol=1e-4)


class TestSynthesis:
    def test_linear_unit(self):
        unit = build_bspline_net(1, 1, 0.1)
        assert unit.measured_error <= 0.05
        assert unit.points_checked == 64
        outside = np.array([[-0.4], [-1e-3], [2.0 + 1e-3], [2.5]])
        nptest.assert_array_equal(unit.network.scalar(outside), 0.0)

    def test_tensor_unit(self):
        unit = build_bspline_net(2, 2, 0.05)
        assert unit.measured_error <= 0.025
        x = np.array([[0.5, 1.5], [1.5, 1.5], [2.2, 0.4]])
        nptest.assert_allclose(unit.network.scalar(x), exact_tensor_bspline(2, x), atol=0.025)
        assert unit.network.scalar(np.array([[3.1, 1.0]]))[0] == 0.0

    def test_tighter_eps_needs_more_precision(self):
        loose = build_bspline_net(2, 1, 0.1)
        tight = build_bspline_net(2, 1, 1e-4)
        assert tight.precision > loose.precision
        assert tight.network.depth > loose.network.depth

    @pytest.mark.parametrize("m, d, eps", [(0, 1, 0.1), (2, 1, 0.0), (2, 1, 1.5), (2, 0, 0.1)])
    def test_invalid_requests(self, m, d, eps):
        with pytest.raises(ConfigurationError):
            build_bspline_net(m, d, eps)

    def test_assembled_series_within_bound(self, rng):
        params = BesovParams(beta=(1.0,), m=1)
        coeffs = SparseCoeffs.from_entries(params, {(0, (0,)): 0.5, (1, (1,)): -1.0, (2, (2,)): 0.25})
        approximant = assemble_approximant(coeffs, 0.01)
        assert approximant.entries == 3
        assert approximant.error_bound == pytest.approx(0.01 * 1.75)
        x = rng.random((400, 1))
        assert verify_approximant(approximant, coeffs, x) <= approximant.error_bound

    def test_empty_series_gives_zero_network(self):
        approximant = assemble_approximant(SparseCoeffs(BesovParams(beta=(1.0, 2.0), m=1)), 0.01)
        assert approximant.entries == 0
        assert approximant.unit is None
        nptest.assert_array_equal(approximant.network.scalar(np.full((3, 2), 0.5)), 0.0)

    def test_violated_bound_reports_the_point(self):
        params = BesovParams(beta=(1.0,), m=1)
        coeffs = SparseCoeffs.from_entries(params, {(0, (0,)): 1.0})
        broken = Approximant(zero_network(1), None, 0, 0.0, 0.0)
        with pytest.raises(SynthesisError) as info:
            verify_approximant(broken, coeffs, np.array([[0.25], [1.0]]))
        assert info.value.point == [1.0]


class TestBudgets:
    def test_unit_width(self):
        assert unit_width(1, 1) == 20
        assert unit_width(2, 2) == 100

    def test_gadget_budget(self):
        # 3 + 2⌈2 log2 3 + 3 + 5⌉⌈log2 2⌉ = 3 + 2·12
        budget = gadget_budget(2, 2, 0.125)
        assert (budget.L0, budget.W0, budget.S0, budget.B0) == (27, 100, 27 * 100 * 100, 18)

    def test_depth_grows_as_eps_shrinks(self):
        assert unit_depth(3, 2, 1e-6) > unit_depth(3, 2, 1e-2)
        with pytest.raises(ConfigurationError):
            unit_depth(2, 2, 0.0)

    def test_certificate(self):
        cert = budget_certificate(4, 1, 1, BesovParams(beta=(1.0,)))
        assert cert.eps == pytest.approx(0.25 / math.log(4))
        assert (cert.L1, cert.W1, cert.S1) == (3, 80, 4 * (2 * 400 + 1))
        assert cert.B1 == 1.0
        assert cert.B1_order_only

    def test_magnitude_exponent(self):
        params = BesovParams(beta=(0.75,), p=1.0, r=2.0)
        # ν = (3/4 − 1/2)/(2 · 1/2) = 1/4, so (1 + 4)(1 − 3/4) = 5/4
        assert magnitude_exponent(1, params) == Fraction(5, 4)
        cert = budget_certificate(16, 1, 1, params)
        assert cert.B1 == pytest.approx(32.0)

    def test_magnitude_exponent_uses_the_plan_nu(self):
        params = BesovParams(beta=(1.5, 1.5), p=1.0, r=2.0)
        plan = make_plan(2, params)
        gap = 1 - params.beta.beta_tilde_exact
        assert magnitude_exponent(2, params) == 2 * (1 + 1 / params.nu_exact) * gap
        assert float(params.nu_exact) == plan.nu

    def test_certificate_needs_two_terms(self):
        with pytest.raises(ConfigurationError):
            budget_certificate(1, 1, 1, BesovParams(beta=(1.0,)))

    def test_certificate_rejects_beta_tilde_at_delta(self):
        # β̃ = δ = 1/2 leaves ν = 0
        with pytest.raises(ConfigurationError):
            budget_certificate(4, 2, 2, BesovParams(beta=(1.0, 1.0), p=1.0, r=2.0))

    def test_affine_magnitude(self):
        budget = affine_budget(4, 1, 2.0, 1, BesovParams(beta=(1.0,)))
        assert budget.B == pytest.approx(3.0)
        assert budget.L == 3

    def test_deep_totals(self):
        stage = DeepStage(N=4, in_dim=1, out_dim=1, m=1, params=BesovParams(beta=(2.0,)))
        budget = deep_budget([stage, stage])
        cert = budget.stages[0]
        assert budget.L == 2 * (cert.L1 + 1)
        assert budget.W == cert.W1
        assert budget.S == 2 * (cert.S1 + 3)

    def test_deep_stage_smoothness_must_exceed_one_over_p(self):
        stage = DeepStage(N=4, in_dim=1, out_dim=1, m=1, params=BesovParams(beta=(1.0,), p=1.0))
        with pytest.raises(ConfigurationError):
            deep_budget([stage])

    def test_deep_stages_must_chain(self):
        first = DeepStage(N=4, in_dim=1, out_dim=2, m=1, params=BesovParams(beta=(2.0,)))
        second = DeepStage(N=4, in_dim=1, out_dim=1, m=1, params=BesovParams(beta=(2.0,)))
        with pytest.raises(ConfigurationError):
            deep_budget([first, second])


class TestCoveringBound:
    def test_value(self):
        assert covering_number_bound(2, 3, 5, 0.5, 0.5) == pytest.approx(25.0 * math.log(4.0))

    def test_empty_class(self):
        assert covering_number_bound(3, 10, 0, 2.0, 0.1) == 0.0

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.2])
    def test_delta_range(self, delta):
        with pytest.raises(ConfigurationError):
            covering_number_bound(2, 3, 5, 1.0, delta)

    @pytest.mark.parametrize("argument, grid", [
        ("L", [1, 2, 4, 8, 16]),
        ("W", [1, 3, 10, 50, 200]),
        ("S", [1, 5, 20, 40, 400]),
        ("B", [1.5, 2.0, 8.0, 100.0, 1e4]),
    ])
    def test_increasing_in_each_size_argument(self, argument, grid):
        base = {"L": 4, "W": 8, "S": 20, "B": 2.0, "delta": 0.01}
        values = [covering_number_bound(**{**base, argument: x}) for x in grid]
        assert all(a < b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("L, W, S, B", [(1, 1, 1, 1.0), (4, 8, 20, 2.0), (10, 50, 200, 3.0)])
    def test_decreasing_in_delta(self, L, W, S, B):
        values = [covering_number_bound(L, W, S, B, delta) for delta in (1e-4, 1e-3, 0.01, 0.1, 0.5, 0.9)]
        assert all(a > b for a, b in zip(values, values[1:]))
