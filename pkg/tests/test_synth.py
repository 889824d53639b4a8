"""Tests for the synthetic target generators and TargetSpec dispatch."""
import numpy as np
import numpy.testing as nptest
import pytest

from besov_lab.analysis.besov import sequence_norm
from besov_lab.errors import ConfigurationError
from besov_lab.models.config import TargetSpec
from besov_lab.models.smoothness import BesovParams, SmoothnessVec
from besov_lab.models.sparse_coeffs import SparseCoeffs
from besov_lab.synth.targets import (
    AffineMap,
    Target,
    affine_target,
    build_target,
    bump_energy,
    constant_series,
    deep_target,
    disjoint_lattice,
    random_series_target,
    random_vg_family,
    spike_target,
    unit_range_series,
    vg_bump_target,
)


class TestSeriesGenerators:
    def test_random_series_is_in_the_unit_sphere(self):
        series = random_series_target((1.0, 2.0), 1.5, 2.0, 2, 3, seed=4)
        assert sequence_norm(series) == pytest.approx(1.0)
        assert series.levels == [0, 1, 2, 3]

    def test_random_series_is_seeded(self):
        a = random_series_target((1.0,), 2.0, 2.0, 1, 4, seed=9)
        b = random_series_target((1.0,), 2.0, 2.0, 1, 4, seed=9)
        c = random_series_target((1.0,), 2.0, 2.0, 1, 4, seed=10)
        assert a.equals(b)
        assert not a.equals(c)

    def test_constant_series(self, rng):
        params = BesovParams(beta=(1.0, 3.0), m=2)
        nptest.assert_allclose(constant_series(0.7, params)(rng.random((40, 2))), 0.7, atol=1e-12)

    def test_disjoint_lattice(self):
        beta = SmoothnessVec(beta=(1.0,))
        assert disjoint_lattice(3, beta, 1)[:, 0].tolist() == [0, 2, 4, 6]
        assert disjoint_lattice(0, beta, 1).shape == (0, 1)

    def test_spikes_have_equal_magnitude(self):
        spikes = spike_target((1.5,), 0.7, 2, 3, seed=1, spike_level=5)
        assert spikes.levels == [0, 5]
        _, values = spikes.level_linear(5)
        assert len(values) == 3
        nptest.assert_allclose(np.abs(values), np.abs(values[0]))
        assert sequence_norm(spikes) == pytest.approx(1.0)

    def test_spikes_without_background(self):
        spikes = spike_target((1.0,), 1.0, 1, 2, seed=0, spike_level=3, background=0.0)
        assert spikes.levels == [3]

    def test_too_many_spikes(self):
        with pytest.raises(ConfigurationError):
            spike_target((1.0,), 1.0, 1, 5, seed=0, spike_level=3)


class TestBumps:
    def test_bump_heights(self):
        bumps = vg_bump_target(3, (1.0,), 1, w=[1, 0, 1, 1])
        indices, values = bumps.level(3)
        assert indices[:, 0].tolist() == [0, 4, 6]
        nptest.assert_allclose(values, 0.125)

    def test_explicit_height(self):
        bumps = vg_bump_target(3, (1.0,), 1, w=[0, 1, 0, 0], delta=2.0)
        assert bumps.get(3, (2,)) == 2.0

    @pytest.mark.parametrize("w", [[1, 0], [1, 2, 0, 1]])
    def test_invalid_patterns(self, w):
        with pytest.raises(ConfigurationError):
            vg_bump_target(3, (1.0,), 1, w=w)

    def test_level_too_coarse(self):
        with pytest.raises(ConfigurationError):
            vg_bump_target(0, (1.0,), 1)

    def test_bump_energy(self):
        # 2^{-2} · N_3(2) = 1/4 · 2/3
        assert bump_energy(2, SmoothnessVec(beta=(1.0,)), 1) == pytest.approx(1.0 / 6.0)

    def test_family(self):
        family = random_vg_family(3, (1.0,), 1, 5, seed=0)
        assert len(family) == 5
        assert all(w.shape == (4,) and set(w.tolist()) <= {0, 1} for w in family)


class TestAffine:
    def test_range_is_checked_on_corners(self):
        with pytest.raises(ConfigurationError) as info:
            AffineMap([[1.0, 1.0]])
        assert "[1, 1]" in str(info.value)
        with pytest.raises(ConfigurationError):
            AffineMap([[1.0]], [-0.1])

    def test_offset_length(self):
        with pytest.raises(ConfigurationError):
            AffineMap([[0.5, 0.5]], [0.0, 0.0])

    def test_map(self):
        amap = AffineMap([[0.5, 0.5], [0.0, 0.25]], [0.0, 0.5])
        assert amap.magnitude == 0.5
        assert (amap.input_dim, amap.output_dim) == (2, 2)
        nptest.assert_allclose(amap(np.array([[1.0, 1.0]])), [[1.0, 0.75]])

    def test_composition(self, rng):
        inner = random_series_target((1.0,), 2.0, 2.0, 1, 3, seed=2)
        target = affine_target(inner, [[0.5, 0.5]])
        x = rng.random((30, 2))
        nptest.assert_allclose(target(x), inner(0.5 * x[:, :1] + 0.5 * x[:, 1:]))
        assert target.d == 2
        assert target.params.d == 1

    def test_dimension_mismatch(self):
        inner = random_series_target((1.0, 1.0), 2.0, 2.0, 1, 2, seed=2)
        with pytest.raises(ConfigurationError):
            affine_target(inner, [[0.5, 0.5]])
        with pytest.raises(ConfigurationError):
            affine_target(lambda z: z[:, 0], [[0.5, 0.5]], d=3)


class TestDeep:
    def test_unit_range(self, rng):
        series = random_series_target((1.0, 2.0), 1.0, 1.0, 2, 3, seed=5).scaled(40.0)
        values = unit_range_series(series)(rng.random((500, 2)))
        assert values.min() >= -1e-12
        assert values.max() <= 1.0 + 1e-12

    def test_unit_range_of_zero(self, rng):
        zero = SparseCoeffs(BesovParams(beta=(1.0,), m=1))
        nptest.assert_allclose(unit_range_series(zero)(rng.random((10, 1))), 0.5, atol=1e-12)

    def test_composition(self, rng):
        inner = unit_range_series(random_series_target((1.0,), 2.0, 2.0, 1, 3, seed=3))
        target = deep_target([AffineMap([[0.5, 0.5]]), inner])
        values = target(rng.random((100, 2)))
        assert values.shape == (100,)
        assert np.all((values >= 0.0) & (values <= 1.0))
        assert len(target.stages) == 2

    def test_stages_must_chain(self):
        inner = random_series_target((1.0, 1.0), 2.0, 2.0, 1, 2, seed=0)
        with pytest.raises(ConfigurationError):
            deep_target([AffineMap([[0.5, 0.5]]), inner])
        with pytest.raises(ConfigurationError):
            deep_target([])


class TestBuildTarget:
    def test_constant(self, rng):
        target = build_target(TargetSpec(kind="constant", value=0.3, beta=[1.0], d=3))
        assert target.d == 3
        nptest.assert_allclose(target(rng.random((20, 3))), 0.3, atol=1e-12)

    def test_series_matches_the_generator(self):
        target = build_target(TargetSpec(kind="series", beta=[1.0, 2.0], K_deep=3, seed=4))
        assert target.coeffs.equals(random_series_target((1.0, 2.0), 2.0, 2.0, 2, 3, seed=4))

    def test_spikes_and_bumps(self):
        spikes = build_target(TargetSpec(kind="spikes", beta=[1.5], m=2, p=0.7, n_spikes=3, spike_level=5))
        assert spikes.coeffs.levels == [0, 5]
        bumps = build_target(TargetSpec(kind="vg-bumps", beta=[1.0], m=1, level=3, pattern=[1, 1, 1, 1]))
        assert len(bumps.coeffs) == 4

    def test_coeff_file(self, tmp_path):
        coeffs = random_series_target((1.0,), 2.0, 2.0, 1, 3, seed=6)
        path = coeffs.save(tmp_path / "series.coeffs")
        target = build_target(TargetSpec(kind="coeff-file", path=str(path), scale=2.0))
        assert target.coeffs.equals(coeffs.scaled(2.0))

    def test_missing_coeff_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            build_target(TargetSpec(kind="coeff-file", path=str(tmp_path / "none.coeffs")))

    def test_affine_composition(self):
        target = build_target(TargetSpec(kind="affine-comp", beta=[1.0], d=2, A=[[0.5, 0.5]], K_deep=3))
        assert target.d == 2
        assert target.affine is not None
        assert target.params.d == 1

    def test_affine_without_map_needs_matching_dimension(self):
        with pytest.raises(ConfigurationError):
            build_target(TargetSpec(kind="affine-comp", beta=[1.0], d=2))

    def test_deep_composition(self, rng):
        spec = TargetSpec(kind="deep-comp", stages=[
            {"kind": "affine", "A": [[0.5, 0.5]]},
            {"kind": "series", "beta": [1.0], "K_deep": 3},
        ])
        target = build_target(spec)
        assert target.d == 2
        values = target(rng.random((50, 2)))
        assert np.all((values >= 0.0) & (values <= 1.0))

    def test_dimension_check_on_call(self, rng):
        target = Target.from_series(random_series_target((1.0,), 2.0, 2.0, 1, 2, seed=0))
        with pytest.raises(ConfigurationError):
            target(rng.random((4, 2)))
        assert target(np.array([0.5])).shape == (1,)
