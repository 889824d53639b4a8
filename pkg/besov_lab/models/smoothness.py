"""
Smoothness and Besov parameter models.

This module defines the parameter objects every other layer is built on:
  - SmoothnessVec: the anisotropic smoothness vector β and its derived
    quantities (β̲, β̄, β̃, β′)
  - LevelLocation: a (k, j) pair addressing one tensor B-spline basis function
  - BesovParams: (p, q, r, β, m) for an anisotropic Besov unit ball, plus the
    admissibility checks that configs are validated against

Floors such as ⌊kβ′_i⌋ and the budget schedule of the adaptive plan are
evaluated in exact rational arithmetic. Smoothness entries are converted to
fractions with a bounded denominator, so 0.8 is treated as 4/5 and a
harmonic mean such as 2/3 does not pick up a rounding error before a ceiling.

These models are used by:
  - bspline: level scales and index sets
  - analysis: the b^β_{p,q} sequence norm
  - approx: the adaptive plan
  - relu: architecture budgets
"""
import math
from fractions import Fraction
from functools import lru_cache
from typing import Any, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, field_validator

from ..errors import ConfigurationError

# Denominator bound used when turning float parameters into exact fractions
_MAX_DENOMINATOR = 10**6


def to_fraction(value: float) -> Fraction:
    """Exact rational stand-in for a (finite) float parameter."""
    return Fraction(value).limit_denominator(_MAX_DENOMINATOR)


def reciprocal(value: float) -> Fraction:
    """1/value as a fraction, with the convention 1/∞ = 0."""
    if math.isinf(value):
        return Fraction(0)
    return 1 / to_fraction(value)


@lru_cache(maxsize=None)
def _exact(beta: Tuple[float, ...]) -> Tuple[Fraction, ...]:
    return tuple(to_fraction(b) for b in beta)


@lru_cache(maxsize=None)
def _ratios(beta: Tuple[float, ...]) -> Tuple[Fraction, ...]:
    exact = _exact(beta)
    low = min(exact)
    return tuple(low / b for b in exact)


def _parse_extended(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return value


class LevelLocation(NamedTuple):
    """Resolution level k and location vector j of a basis function M^d_{k,j}."""

    k: int
    j: Tuple[int, ...]


class SmoothnessVec(BaseModel):
    """
    Anisotropic smoothness β = (β_1, ..., β_d).

    Derived quantities:
        beta_min:   β̲ = min_i β_i
        beta_max:   β̄ = max_i β_i
        beta_tilde: β̃ = (Σ_j 1/β_j)^{-1}, the effective smoothness that
                    governs every rate in the package
        beta_prime: β′_i = β̲/β_i, the per-axis dilation exponents

    β̃ ≤ β̲ ≤ β̄ always holds, and β̃ = β₀/d for an isotropic vector.
    """

    model_config = ConfigDict(frozen=True)

    beta: Tuple[float, ...]

    @field_validator("beta", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> Any:
        if isinstance(value, (int, float)):
            return (float(value),)
        return value

    @field_validator("beta")
    @classmethod
    def _positive(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value:
            raise ValueError("beta must have at least one entry")
        for b in value:
            if not (b > 0) or math.isinf(b):
                raise ValueError(f"every beta_i must be a finite positive number, got {b}")
        return value

    @classmethod
    def isotropic(cls, beta0: float, d: int) -> "SmoothnessVec":
        return cls(beta=(float(beta0),) * d)

    @property
    def d(self) -> int:
        return len(self.beta)

    @property
    def exact(self) -> Tuple[Fraction, ...]:
        return _exact(self.beta)

    @property
    def beta_min_exact(self) -> Fraction:
        return min(_exact(self.beta))

    @property
    def beta_tilde_exact(self) -> Fraction:
        return 1 / sum(1 / b for b in _exact(self.beta))

    @property
    def ratios(self) -> Tuple[Fraction, ...]:
        """β′_i = β̲/β_i as exact fractions."""
        return _ratios(self.beta)

    @property
    def beta_min(self) -> float:
        return min(self.beta)

    @property
    def beta_max(self) -> float:
        return max(self.beta)

    @property
    def beta_tilde(self) -> float:
        return float(self.beta_tilde_exact)

    @property
    def beta_prime(self) -> Tuple[float, ...]:
        return tuple(float(r) for r in self.ratios)

    def scales(self, k: int) -> Tuple[int, ...]:
        """Per-axis dyadic exponents ⌊kβ′_i⌋ of level k."""
        return tuple(math.floor(k * r) for r in self.ratios)


class BesovParams(BaseModel):
    """
    Parameters of an anisotropic Besov unit ball U(B^β_{p,q}) and its error norm.

    Attributes:
        p: integrability index in (0, ∞]; small p means spatially
           inhomogeneous smoothness (spikes and jumps)
        q: fine summability index in (0, ∞]
        r: index of the L^r error norm in (0, ∞]
        beta: anisotropic smoothness
        m: cardinal B-spline order

    Construction only checks positivity. The two admissibility conditions
    (β̃ > (1/p − 1/r)_+ and 0 < β̄ < min(m, m − 1 + 1/p)) are checked by
    check_admissible(), which the approx-rate command calls; estimation studies
    only log them.
    """

    model_config = ConfigDict(frozen=True)

    beta: SmoothnessVec
    p: float = 2.0
    q: float = 2.0
    r: float = 2.0
    m: int = 2

    @field_validator("beta", mode="before")
    @classmethod
    def _coerce_beta(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple, int, float)):
            return SmoothnessVec(beta=value)
        return value

    @field_validator("p", "q", "r", mode="before")
    @classmethod
    def _coerce_extended(cls, value: Any) -> Any:
        return _parse_extended(value)

    @field_validator("p", "q", "r")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not (value > 0):
            raise ValueError(f"Besov indices must be positive, got {value}")
        return value

    @field_validator("m")
    @classmethod
    def _order(cls, value: int) -> int:
        if value < 0:
            raise ValueError(f"spline order must be nonnegative, got {value}")
        return value

    @property
    def d(self) -> int:
        return self.beta.d

    @property
    def delta_exact(self) -> Fraction:
        """δ = (1/p − 1/r)_+."""
        return max(reciprocal(self.p) - reciprocal(self.r), Fraction(0))

    @property
    def delta(self) -> float:
        return float(self.delta_exact)

    @property
    def nu_exact(self) -> Optional[Fraction]:
        """ν = (β̃ − δ)/(2δ); None when δ = 0 (no tail levels)."""
        delta = self.delta_exact
        if delta == 0:
            return None
        return (self.beta.beta_tilde_exact - delta) / (2 * delta)

    def admissibility_problems(self) -> Tuple[str, ...]:
        problems = []
        if not self.beta.beta_tilde_exact > self.delta_exact:
            problems.append(
                f"beta_tilde={self.beta.beta_tilde:.6g} must exceed (1/p - 1/r)_+={self.delta:.6g}"
            )
        limit = min(Fraction(self.m), self.m - 1 + reciprocal(self.p))
        if not max(self.beta.exact) < limit:
            problems.append(
                f"beta_max={self.beta.beta_max:.6g} must be below min(m, m-1+1/p)={float(limit):.6g} "
                f"for spline order m={self.m}"
            )
        return tuple(problems)

    def check_admissible(self) -> None:
        problems = self.admissibility_problems()
        if problems:
            raise ConfigurationError("inadmissible Besov parameters: " + "; ".join(problems))

    def with_updates(self, **changes: Any) -> "BesovParams":
        fields = self.model_dump()
        fields.update(changes)
        return BesovParams(**fields)

