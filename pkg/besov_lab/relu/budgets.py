"""
Architecture budgets and covering-number bounds for sparse ReLU classes.

Pure calculators; nothing here builds a network.

  - gadget_budget: (L0, W0, S0, B0) of the B-spline unit at tolerance eps
  - budget_certificate: (L1, W1, S1, B1) for an N-term series approximant
  - affine_budget: the same at the inner dimension, with B scaled by (d̃C+1)
  - deep_budget: totals over clipped compositions of stages
  - covering_number_bound: log covering number of Φ(L, W, S, B)

The depth formulas contain an existential constant c; it is fixed to 1
(DEPTH_CONSTANT) and certificates say so. B1 is O(N^e) with an unknown
constant, reported as N^e and flagged order-only.
"""
import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence

from pydantic import BaseModel

from ..errors import ConfigurationError
from ..models.smoothness import BesovParams, reciprocal

logger = logging.getLogger(__name__)

DEPTH_CONSTANT = 1.0


class GadgetBudget(BaseModel):
    d: int
    m: int
    eps: float
    L0: int
    W0: int
    S0: int
    B0: int


class BudgetCertificate(BaseModel):
    """Architecture bounds for an N-term approximant at tolerance eps = N^{−β̃}/ln N."""
    N: int
    d: int
    m: int
    eps: float
    W0: int
    L1: int
    W1: int
    S1: int
    B1: float
    B1_exponent: float
    B1_order_only: bool = True
    depth_constant: float = DEPTH_CONSTANT
    notes: List[str] = []


class ArchitectureBudget(BaseModel):
    L: int
    W: int
    S: int
    B: float
    stages: List[BudgetCertificate]
    notes: List[str] = []


class DeepStage(BaseModel):
    """One composition stage h_ℓ: [0,1]^{in_dim} → [0,1]^{out_dim}."""
    N: int
    in_dim: int
    out_dim: int
    m: int
    params: BesovParams


def unit_width(d: int, m: int) -> int:
    """W0 = 6dm(m+2) + 2d."""
    return 6 * d * m * (m + 2) + 2 * d


def unit_depth(d: int, m: int, eps: float, c: float = DEPTH_CONSTANT) -> int:
    """3 + 2⌈log2(3^{d∨m}/(εc)) + 5⌉⌈log2(d∨m)⌉."""
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    top = max(d, m)
    inner = top * math.log2(3.0) - math.log2(eps * c) + 5.0
    return 3 + 2 * math.ceil(inner) * math.ceil(math.log2(top))


def gadget_budget(d: int, m: int, eps: float) -> GadgetBudget:
    L0 = unit_depth(d, m, eps)
    W0 = unit_width(d, m)
    return GadgetBudget(d=d, m=m, eps=eps, L0=L0, W0=W0, S0=L0 * W0 * W0, B0=2 * (m + 1) ** m)


def magnitude_exponent(d: int, params: BesovParams) -> Fraction:
    """d(1 + 1/ν)(1/p − β̃)_+ with ν = (β̃ − δ)/(2δ) as in the adaptive plan; 1/ν = 0 when δ = 0."""
    beta_tilde = params.beta.beta_tilde_exact
    nu = params.nu_exact
    inv_nu = Fraction(0) if nu is None else 1 / nu
    gap = reciprocal(params.p) - beta_tilde
    return d * (1 + inv_nu) * max(gap, Fraction(0))


def budget_certificate(N: int, d: int, m: int, params: BesovParams) -> BudgetCertificate:
    """
    Evaluate L1, W1, S1 exactly and B1 = N^{d(1+1/ν)(1/p−β̃)_+} (constant 1).

    Unlike the other calculators this one raises: the B1 exponent needs
    ν > 0, so β̃ ≤ δ is a configuration error.

    Raises:
        ConfigurationError: N < 2, or β̃ ≤ δ so that ν is not positive
    """
    if N < 2:
        raise ConfigurationError(f"budget certificates need N ≥ 2, got {N}")
    if params.delta_exact > 0 and params.beta.beta_tilde_exact <= params.delta_exact:
        raise ConfigurationError("β̃ must exceed δ for a positive ν")
    eps = N ** (-params.beta.beta_tilde) / math.log(N)
    W0 = unit_width(d, m)
    L1 = unit_depth(d, m, eps)
    exponent = magnitude_exponent(d, params)
    notes = [
        f"depth constant c set to {DEPTH_CONSTANT}",
        "B1 is order-only: the O(.) constant is set to 1",
    ]
    cert = BudgetCertificate(
        N=N,
        d=d,
        m=m,
        eps=eps,
        W0=W0,
        L1=L1,
        W1=N * W0,
        S1=((L1 - 1) * W0 * W0 + 1) * N,
        B1=float(N ** float(exponent)) if exponent else 1.0,
        B1_exponent=float(exponent),
        notes=notes,
    )
    logger.debug(f"Budget certificate N={N}, d={d}, m={m}: L1={cert.L1}, W1={cert.W1}, S1={cert.S1}")
    return cert


def affine_budget(N: int, d_tilde: int, C: float, m: int, params: BesovParams) -> ArchitectureBudget:
    """
    Budget for x ↦ f(Ax + b) with f on [0,1]^{d̃} and ‖A‖∞, ‖b‖∞ ≤ C.

    Depth, width and sparsity are those of the inner approximant; the
    precomposed first layer raises the magnitude bound to (d̃C + 1)·B1.
    """
    if C < 0:
        raise ConfigurationError(f"affine bound C must be nonnegative, got {C}")
    cert = budget_certificate(N, d_tilde, m, params)
    return ArchitectureBudget(
        L=cert.L1, W=cert.W1, S=cert.S1, B=(d_tilde * C + 1) * cert.B1, stages=[cert],
        notes=list(cert.notes),
    )


def deep_budget(stages: Sequence[DeepStage]) -> ArchitectureBudget:
    """
    Totals for clip ∘ h_H ∘ ... ∘ clip ∘ h_1:
    L = Σ(L1 + 1), W = max(W1 ∨ m_{ℓ+1}), S = Σ(S1 + 3m_{ℓ+1}), B = max B1.

    Raises:
        ConfigurationError: empty stages, non-chaining dimensions, or a
            stage with β̃ ≤ 1/p
    """
    if not stages:
        raise ConfigurationError("deep_budget needs at least one stage")
    certs: List[BudgetCertificate] = []
    previous: Optional[DeepStage] = None
    for index, stage in enumerate(stages):
        if stage.params.d != stage.in_dim:
            raise ConfigurationError(f"stage {index}: smoothness has {stage.params.d} entries for input dim {stage.in_dim}")
        if previous is not None and previous.out_dim != stage.in_dim:
            raise ConfigurationError(
                f"stage {index} expects {stage.in_dim} inputs but stage {index - 1} has {previous.out_dim} outputs"
            )
        if stage.params.beta.beta_tilde_exact <= reciprocal(stage.params.p):
            raise ConfigurationError(f"stage {index}: β̃ = {stage.params.beta.beta_tilde:.4g} must exceed 1/p")
        certs.append(budget_certificate(stage.N, stage.in_dim, stage.m, stage.params))
        previous = stage
    return ArchitectureBudget(
        L=sum(c.L1 + 1 for c in certs),
        W=max(max(c.W1, s.out_dim) for c, s in zip(certs, stages)),
        S=sum(c.S1 + 3 * s.out_dim for c, s in zip(certs, stages)),
        B=max(c.B1 for c in certs),
        stages=certs,
        notes=list(certs[0].notes),
    )


def covering_number_bound(L: float, W: float, S: float, B: float, delta: float) -> float:
    """
    log N(δ, Φ(L, W, S, B), ‖·‖∞) ≤ 2SL·log((B∨1)(W+1)) + S·log(L/δ).

    Raises:
        ConfigurationError: delta outside (0, 1) or a negative argument
    """
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    if min(L, W, S, B) < 0:
        raise ConfigurationError("covering-number arguments must be nonnegative")
    if S == 0:
        return 0.0
    return 2.0 * S * L * math.log(max(B, 1.0) * (W + 1)) + S * math.log(L / delta)
