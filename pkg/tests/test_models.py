"""Tests for smoothness parameters, sparse coefficient sets and experiment configs."""
import math
from fractions import Fraction

import numpy as np
import numpy.testing as nptest
import pytest

from besov_lab.errors import ConfigurationError
from besov_lab.models.config import ExperimentConfig, QuadratureSpec, load_config, parse_config
from besov_lab.models.smoothness import BesovParams, SmoothnessVec
from besov_lab.models.sparse_coeffs import SparseCoeffs

APPROX_TOML = """
kind = "approx-rate"
seed = 7
jobs = 2

[target]
kind = "series"
beta = [1.0, 4.0]
q = "inf"
m = 5

[approx]
K_list = [2, 3, 4, 5]
r = "inf"
"""


class TestSmoothness:
    def test_derived_quantities(self):
        beta = SmoothnessVec(beta=(1.0, 4.0))
        assert beta.beta_min == 1.0
        assert beta.beta_max == 4.0
        assert beta.beta_tilde_exact == Fraction(4, 5)
        assert beta.beta_prime == (1.0, 0.25)
        assert beta.scales(7) == (7, 1)

    def test_isotropic_effective_smoothness(self):
        assert SmoothnessVec.isotropic(1.5, 3).beta_tilde == pytest.approx(0.5)

    def test_harmonic_mean_is_exact(self):
        beta = SmoothnessVec(beta=(0.8, 2.0, 4.0))
        # 1/0.8 + 1/2 + 1/4 = 2
        assert beta.beta_tilde_exact == Fraction(1, 2)

    @pytest.mark.parametrize("beta", [(), (0.0,), (1.0, -2.0), (math.inf,)])
    def test_invalid_vectors(self, beta):
        with pytest.raises(ValueError):
            SmoothnessVec(beta=beta)

    def test_infinite_indices_from_strings(self):
        params = BesovParams(beta=(1.0,), p="inf", q="Infinity")
        assert math.isinf(params.p) and math.isinf(params.q)

    def test_delta(self):
        assert BesovParams(beta=(1.0,), p=1.0, r=2.0).delta_exact == Fraction(1, 2)
        assert BesovParams(beta=(1.0,), p=4.0, r=2.0).delta == 0.0
        assert BesovParams(beta=(1.0,), p=1.0, r="inf").delta == 1.0

    def test_nu(self):
        # β̃ = 3/4, δ = 1/2: (3/4 − 1/2)/(2 · 1/2)
        assert BesovParams(beta=(0.75,), p=1.0, r=2.0).nu_exact == Fraction(1, 4)
        assert BesovParams(beta=(1.0,), p=2.0, r=2.0).nu_exact is None

    def test_admissibility(self):
        assert BesovParams(beta=(1.0, 4.0), m=5).admissibility_problems() == ()
        problems = BesovParams(beta=(1.0, 1.0), p=1.0, r=2.0, m=1).admissibility_problems()
        assert len(problems) == 2
        with pytest.raises(ConfigurationError):
            BesovParams(beta=(3.0,), m=2).check_admissible()

    def test_with_updates(self):
        params = BesovParams(beta=(1.0, 2.0), p=1.0, m=3)
        updated = params.with_updates(r=math.inf)
        assert updated.beta == params.beta
        assert updated.m == 3 and math.isinf(updated.r)


class TestSparseCoeffs:
    def _coeffs(self):
        params = BesovParams(beta=(1.0, 2.0), m=1)
        return SparseCoeffs.from_entries(params, {
            (0, (0, 0)): 1.0,
            (2, (3, 1)): -0.5,
            (2, (-1, 0)): 0.25,
            (1, (1, -1)): 2.0,
        })

    def test_levels_and_lookup(self):
        coeffs = self._coeffs()
        assert coeffs.levels == [0, 1, 2]
        assert len(coeffs) == 4
        assert coeffs.get(2, (3, 1)) == -0.5
        assert coeffs.get(2, (0, 0)) == 0.0
        assert coeffs.get(5, (0, 0), default=7.0) == 7.0

    def test_levels_are_lexicographic(self):
        indices, values = self._coeffs().level(2)
        assert indices.tolist() == [[-1, 0], [3, 1]]
        nptest.assert_array_equal(values, [0.25, -0.5])

    def test_locations_outside_the_index_set(self):
        params = BesovParams(beta=(1.0, 2.0), m=1)
        with pytest.raises(ConfigurationError):
            SparseCoeffs.from_entries(params, {(1, (3, 0)): 1.0})
        with pytest.raises(ConfigurationError):
            SparseCoeffs.from_entries(params, {(1, (-2, 0)): 1.0})

    def test_repeated_location(self):
        coeffs = SparseCoeffs(BesovParams(beta=(1.0,), m=1))
        with pytest.raises(ConfigurationError):
            coeffs.set_level(1, np.array([[0], [0]]), np.array([1.0, 2.0]))

    def test_norm_helpers(self):
        coeffs = self._coeffs()
        assert coeffs.abs_sum() == pytest.approx(3.75)
        assert coeffs.max_abs() == 2.0
        assert coeffs.restrict(1).levels == [0, 1]
        assert len(coeffs.scaled(0.0).prune()) == 0

    def test_sum_and_difference(self, rng):
        coeffs = self._coeffs()
        x = rng.random((20, 2))
        doubled = coeffs + coeffs
        nptest.assert_allclose(doubled(x), 2.0 * coeffs(x))
        nptest.assert_allclose((doubled - coeffs)(x), coeffs(x))

    def test_mismatched_bases_cannot_combine(self):
        other = SparseCoeffs(BesovParams(beta=(2.0, 2.0), m=1))
        with pytest.raises(ConfigurationError):
            self._coeffs() + other

    def test_text_format_is_exact(self, tmp_path):
        coeffs = self._coeffs().scaled(1.0 / 3.0)
        loaded = SparseCoeffs.load(coeffs.save(tmp_path / "c.coeffs"))
        assert loaded.equals(coeffs)
        assert coeffs.dumps().splitlines()[0] == "besov-coeffs v1; d=2; m=1; beta=1.0,2.0"

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "not-a-header\n",
            "besov-coeffs v1; d=1; m=1\n",
            "besov-coeffs v1; d=1; m=1; beta=1.0\n0 0\n",
            "besov-coeffs v1; d=1; m=1; beta=1.0\n0 0 nan\n",
            "besov-coeffs v1; d=1; m=1; beta=1.0\n0 0 1.0\n0 0 2.0\n",
            "besov-coeffs v1; d=2; m=1; beta=1.0\n",
        ],
    )
    def test_malformed_files(self, text):
        with pytest.raises(ConfigurationError):
            SparseCoeffs.loads(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            SparseCoeffs.load(tmp_path / "absent.coeffs")


class TestConfig:
    def test_load(self, tmp_path):
        path = tmp_path / "approx.toml"
        path.write_text(APPROX_TOML, encoding="utf-8")
        config = load_config(path)
        assert config.kind == "approx-rate"
        assert math.isinf(config.target.q)
        assert math.isinf(config.approx.r)
        assert config.target.besov_params().beta.beta == (1.0, 4.0)

    def test_hash_ignores_jobs_and_out(self, tmp_path):
        path = tmp_path / "approx.toml"
        path.write_text(APPROX_TOML, encoding="utf-8")
        config = load_config(path)
        moved = config.with_overrides(jobs=8, out=str(tmp_path / "elsewhere"))
        assert moved.jobs == 8
        assert moved.config_hash() == config.config_hash()
        assert config.with_overrides(seed=8).config_hash() != config.config_hash()
        assert config.with_overrides(seed=None) is config

    def test_syntax_error_names_the_file(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("kind = \n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as info:
            load_config(path)
        assert "broken.toml" in str(info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.toml")

    def test_validation_error_names_the_field(self):
        with pytest.raises(ConfigurationError) as info:
            parse_config({"kind": "approx-rate", "approx": {"K_list": [1, 2]}, "target": {"m": -1}})
        assert "target.m" in str(info.value)

    @pytest.mark.parametrize(
        "data",
        [
            {"kind": "approx-rate"},
            {"kind": "est-rate"},
            {"kind": "net-synth"},
            {"kind": "compare", "estimation": {"n_list": [8], "estimators": [{"kind": "adaptive-series"}]}},
            {"kind": "approx-rate", "approx": {"K_list": [1]}, "unknown": 1},
        ],
    )
    def test_missing_sections(self, data):
        with pytest.raises(ConfigurationError):
            parse_config(data)

    def test_target_kind_requirements(self):
        with pytest.raises(ConfigurationError):
            parse_config({"kind": "net-synth", "net_synth": {}, "target": {"kind": "deep-comp"}})
        with pytest.raises(ConfigurationError):
            parse_config({"kind": "net-synth", "net_synth": {}, "target": {"kind": "coeff-file"}})

    def test_quadrature_kind(self):
        quad = QuadratureSpec()
        assert quad.resolved_kind(2) == "grid"
        assert quad.resolved_kind(3) == "mc"
        with pytest.raises(ConfigurationError):
            QuadratureSpec(kind="grid").resolved_kind(4)

    def test_estimator_labels(self):
        config = ExperimentConfig(kind="compare", estimation={
            "n_list": [8, 16],
            "estimators": [{"kind": "adaptive-series", "name": "sparse"}, {"kind": "kernel-ridge"}],
        })
        assert [spec.label for spec in config.estimation.estimators] == ["sparse", "kernel-ridge"]
