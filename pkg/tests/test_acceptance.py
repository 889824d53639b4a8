"""Harness-scale runs of the shipped configs. Deselected by default; run with `pytest -m slow`."""
import json
import math
from pathlib import Path

import pytest

from besov_lab.cli.main import main
from besov_lab.models.report import STATUS_FITTED, STATUS_NOISE_FLOOR
from besov_lab.relu.gadgets import build_bspline_net
from besov_lab.store.artifact_store import ArtifactStore

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

pytestmark = pytest.mark.slow


def _run(command, name, out, *extra):
    assert main([command, "--config", str(CONFIGS / name), "--out", str(out), *extra]) == 0
    return ArtifactStore(out)


class TestGadgetContract:
    @pytest.mark.parametrize("m, d", [(1, 1), (2, 1), (2, 2)])
    def test_error_and_depth(self, m, d):
        coarse = build_bspline_net(m, d, 1e-1)
        fine = build_bspline_net(m, d, 1e-2)
        assert coarse.measured_error <= 1e-1
        assert fine.measured_error <= 1e-2
        # depth grows at most linearly in log(1/eps)
        assert fine.network.stats.L <= 3 * coarse.network.stats.L

    def test_series_certificate(self, tmp_path, monkeypatch):
        monkeypatch.chdir(ROOT)
        store = _run("net-synth", "net_series_aniso.toml", tmp_path / "net")
        certificate = store.read_json("certificate.json")
        assert certificate["entries"] == 10
        assert certificate["points_checked"] == 128 * 128
        assert certificate["measured_error"] <= certificate["error_bound"]


class TestApproximationRates:
    @pytest.mark.parametrize(
        "name, beta_tilde",
        [("approx_iso_1_1.toml", 0.5), ("approx_aniso_1_4.toml", 0.8), ("approx_aniso_d3.toml", 0.5)],
    )
    def test_slope(self, tmp_path, name, beta_tilde):
        report = _run("approx-rate", name, tmp_path / "run").load_report()
        assert report.status == STATUS_FITTED
        assert len(report.points) >= 5
        assert report.exponent_theory == pytest.approx(-beta_tilde)
        assert report.within(0.25)

    def test_constant_target(self, tmp_path):
        report = _run("approx-rate", "approx_constant.toml", tmp_path / "run").load_report()
        assert report.status == STATUS_NOISE_FLOOR


class TestEstimationRates:
    @pytest.mark.parametrize(
        "name, exponent",
        [("est_affine_1_4.toml", -8.0 / 13.0), ("est_iso_control.toml", -0.5)],
    )
    def test_slope(self, tmp_path, name, exponent):
        report = _run("est-rate", name, tmp_path / "run").load_report()
        assert report.exponent_theory == pytest.approx(exponent)
        assert report.within(0.3)

    def test_in_span_target(self, tmp_path):
        report = _run("est-rate", "est_in_span.toml", tmp_path / "run").load_report()
        assert report.status == STATUS_NOISE_FLOOR

    def test_dimensionality_contrast(self, tmp_path):
        slopes = {}
        for name in ("contrast_aniso_d2", "contrast_aniso_d6", "contrast_iso_d2", "contrast_iso_d6"):
            report = _run("est-rate", f"{name}.toml", tmp_path / name).load_report()
            slopes[name] = report.exponent_fit
        anisotropic = abs(slopes["contrast_aniso_d6"] - slopes["contrast_aniso_d2"])
        isotropic = abs(slopes["contrast_iso_d6"] - slopes["contrast_iso_d2"])
        assert anisotropic < isotropic


class TestComparisons:
    def test_adaptive_beats_nonadaptive_on_spikes(self, tmp_path):
        table = _run("compare", "compare_spikes.toml", tmp_path / "run").load_comparison()
        first, second = table.estimators
        for row in table.rows:
            assert table.seed_wins(first, second, row.n) >= 4

    def test_series_beats_kernel_ridge_on_a_ridge_target(self, tmp_path):
        table = _run("compare", "compare_ridge_d8.toml", tmp_path / "run").load_comparison()
        series, kernel = table.estimators
        for row in table.rows[-2:]:
            assert row.mean[series] < row.mean[kernel]

    def test_byte_reproducible_under_any_worker_count(self, tmp_path):
        one = _run("compare", "compare_spikes.toml", tmp_path / "one", "--jobs", "1")
        four = _run("compare", "compare_spikes.toml", tmp_path / "four", "--jobs", "4")
        for name in ("compare.json", "compare.csv"):
            assert one.path(name).read_bytes() == four.path(name).read_bytes()
        info = json.loads(four.path("run-info.json").read_text(encoding="utf-8"))
        assert math.isfinite(info["wall_time_seconds"])
