"""
Closed-form rate exponents.

  - rate_affine: −2β̃/(2β̃+1) for affine compositions (and plain anisotropic
    targets), with the rate value with and without the log(n)³ factor
  - rate_deep: the deep-composition exponent with the downstream smoothness
    discount and the binding stage
  - rate_linear_lower: lower-bound exponents for linear estimators
  - rate_isotropic: −2β₀/(2β₀+d)

Exponents are computed in exact rational arithmetic and converted to float
once, so hand-computed fractions compare equal.
"""
import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence

from pydantic import BaseModel

from ..errors import ConfigurationError
from ..models.smoothness import SmoothnessVec, reciprocal, to_fraction

logger = logging.getLogger(__name__)

# Free margin of the affine-hull lower bound when d̃ < d/2
DEFAULT_KAPPA = 0.01


class RateValue(BaseModel):
    exponent: float
    beta_tilde: float
    rate: float
    rate_log3: float


class DeepRate(BaseModel):
    exponent: float
    beta_tilde_star: List[float]
    beta_tilde_star_star: float
    binding_stage: int
    rate: float


class LinearLowerRate(BaseModel):
    nonadaptive_exponent: float
    affine_hull_exponent: Optional[float]
    v: float
    a_d: float


def _minimax_exponent(beta_tilde: Fraction) -> Fraction:
    return -2 * beta_tilde / (2 * beta_tilde + 1)


def _check_n(n: float) -> None:
    if n < 2:
        raise ConfigurationError(f"rates need n >= 2, got {n}")


def rate_affine(n: float, beta: SmoothnessVec) -> RateValue:
    """n^{−2β̃/(2β̃+1)}, also multiplied by log(n)³."""
    _check_n(n)
    exponent = float(_minimax_exponent(beta.beta_tilde_exact))
    rate = n**exponent
    return RateValue(exponent=exponent, beta_tilde=beta.beta_tilde, rate=rate, rate_log3=rate * math.log(n) ** 3)


def rate_isotropic(n: float, beta0: float, d: int) -> RateValue:
    """The isotropic case β = (β₀, ..., β₀): exponent −2β₀/(2β₀+d)."""
    return rate_affine(n, SmoothnessVec.isotropic(beta0, d))


def rate_deep(n: float, betas: Sequence[SmoothnessVec], p: float, eps: float = 0.0) -> DeepRate:
    """
    Deep-composition exponent −2β̃**/(2β̃**+1).

    β̃*^{(ℓ)} = β̃^{(ℓ)} Π_{k>ℓ} [(β̲^{(k)} − 1/p + eps) ∧ 1] and β̃** is
    their minimum; binding_stage is the (1-based) stage attaining it.

    Raises:
        ConfigurationError: no stages, or a stage with β̃ ≤ 1/p
    """
    _check_n(n)
    if not betas:
        raise ConfigurationError("rate_deep needs at least one stage")
    inv_p = reciprocal(p)
    margin = to_fraction(eps)
    for index, beta in enumerate(betas, start=1):
        if not beta.beta_tilde_exact > inv_p:
            raise ConfigurationError(f"stage {index}: beta_tilde={beta.beta_tilde:.6g} must exceed 1/p={float(inv_p):.6g}")
    discounts = [min(beta.beta_min_exact - inv_p + margin, Fraction(1)) for beta in betas]
    stars: List[Fraction] = []
    for index, beta in enumerate(betas):
        value = beta.beta_tilde_exact
        for factor in discounts[index + 1:]:
            value *= factor
        stars.append(value)
    star_star = min(stars)
    binding = stars.index(star_star) + 1
    exponent = float(_minimax_exponent(star_star))
    return DeepRate(
        exponent=exponent,
        beta_tilde_star=[float(s) for s in stars],
        beta_tilde_star_star=float(star_star),
        binding_stage=binding,
        rate=n**exponent,
    )


def rate_linear_lower(
    n: float,
    d: int,
    d_tilde: int,
    beta_min: float,
    p: float,
    beta_tilde: Optional[float] = None,
    kappa: float = DEFAULT_KAPPA,
) -> LinearLowerRate:
    """
    Lower-bound exponents for linear estimators.

    nonadaptive: −(2β̃ − v)/(2β̃ + 1 − v) with v = 2(1/p − 1/2)_+; β̃
        defaults to β̲/d̃ (an isotropic inner function).
    affine hull: −2s/(2s + d) with s = β̲ − d̃/p + d/2 + a_d and a_d = 1 + κ
        when d̃ < d/2, else 0. Defined for 0 < p ≤ 2 only (None otherwise).

    Raises:
        ConfigurationError: d_tilde outside 1..d
    """
    _check_n(n)
    if not 1 <= d_tilde <= d:
        raise ConfigurationError(f"need 1 <= d_tilde <= d, got d_tilde={d_tilde}, d={d}")
    inv_p = reciprocal(p)
    bt = to_fraction(beta_tilde) if beta_tilde is not None else to_fraction(beta_min) / d_tilde
    v = 2 * max(inv_p - Fraction(1, 2), Fraction(0))
    nonadaptive = -(2 * bt - v) / (2 * bt + 1 - v)
    a_d = (1 + to_fraction(kappa)) if 2 * d_tilde < d else Fraction(0)
    hull: Optional[float] = None
    if p <= 2:
        s = to_fraction(beta_min) - d_tilde * inv_p + Fraction(d, 2) + a_d
        hull = float(-2 * s / (2 * s + d))
    return LinearLowerRate(nonadaptive_exponent=float(nonadaptive), affine_hull_exponent=hull, v=float(v), a_d=float(a_d))
