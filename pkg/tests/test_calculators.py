"""Hand-computed values for the closed-form calculators, read from tests/golden/calculators.json."""
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from besov_lab.estimators.rates import rate_affine, rate_deep, rate_linear_lower
from besov_lab.models.smoothness import BesovParams, SmoothnessVec
from besov_lab.relu.budgets import budget_certificate, covering_number_bound

GOLDEN = json.loads((Path(__file__).parent / "golden" / "calculators.json").read_text(encoding="utf-8"))


def _exact(text):
    return float(Fraction(text))


def _cases(name):
    return pytest.mark.parametrize("case", GOLDEN[name], ids=[f"{name}-{i}" for i in range(len(GOLDEN[name]))])


def test_ten_cases_per_calculator():
    assert {name: len(cases) for name, cases in GOLDEN.items()} == {
        "rate_affine": 10,
        "rate_deep": 10,
        "rate_linear_lower": 10,
        "covering_number_bound": 10,
        "budget_certificate": 10,
    }


@_cases("rate_affine")
def test_rate_affine(case):
    value = rate_affine(case["n"], SmoothnessVec(beta=tuple(case["beta"])))
    assert value.beta_tilde == _exact(case["beta_tilde"])
    assert value.exponent == _exact(case["exponent"])


@_cases("rate_deep")
def test_rate_deep(case):
    stages = [SmoothnessVec(beta=tuple(beta)) for beta in case["stages"]]
    rate = rate_deep(100, stages, float(case["p"]), case["eps"])
    assert rate.beta_tilde_star == [_exact(s) for s in case["beta_tilde_star"]]
    assert rate.beta_tilde_star_star == _exact(case["beta_tilde_star_star"])
    assert rate.binding_stage == case["binding_stage"]
    assert rate.exponent == _exact(case["exponent"])


@_cases("rate_deep")
def test_single_stage_matches_rate_affine(case):
    first = SmoothnessVec(beta=tuple(case["stages"][0]))
    assert rate_deep(100, [first], float(case["p"])).exponent == rate_affine(100, first).exponent


@_cases("rate_linear_lower")
def test_rate_linear_lower(case):
    bounds = rate_linear_lower(
        100, case["d"], case["d_tilde"], case["beta_min"], case["p"],
        beta_tilde=case["beta_tilde"], kappa=case["kappa"],
    )
    assert bounds.v == _exact(case["v"])
    assert bounds.a_d == _exact(case["a_d"])
    assert bounds.nonadaptive_exponent == _exact(case["nonadaptive_exponent"])
    if case["affine_hull_exponent"] is None:
        assert bounds.affine_hull_exponent is None
    else:
        assert bounds.affine_hull_exponent == _exact(case["affine_hull_exponent"])


@_cases("covering_number_bound")
def test_covering_number_bound(case):
    delta = math.exp(-1.0) if case["delta"] == "1/e" else case["delta"]
    expected = case["constant"] + sum(coef * math.log(arg) for coef, arg in case["log_terms"])
    # real-valued: the closed form and the bound round their logs differently
    assert covering_number_bound(case["L"], case["W"], case["S"], case["B"], delta) == pytest.approx(expected, rel=1e-12)


@_cases("budget_certificate")
def test_budget_certificate(case):
    params = BesovParams(beta=case["beta"], p=case["p"], r=case["r"], m=case["m"])
    cert = budget_certificate(case["N"], case["d"], case["m"], params)
    assert (cert.W0, cert.L1, cert.W1, cert.S1) == (case["W0"], case["L1"], case["W1"], case["S1"])
    assert cert.B1_exponent == _exact(case["B1_exponent"])
    if cert.B1_exponent == 0:
        assert cert.B1 == 1.0
    assert cert.B1_order_only
