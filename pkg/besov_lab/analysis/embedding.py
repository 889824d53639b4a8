"""
Embedding relations between anisotropic Besov spaces, as parameter checks.

Nothing here touches a function: the report only evaluates the parameter
conditions under which B^β_{p,q} embeds into another Besov space, into a
Hölder space or into the continuous functions.
"""
import math
from typing import List, Optional, Tuple

from pydantic import BaseModel

from ..models.smoothness import BesovParams, reciprocal


class EmbeddingReport(BaseModel):
    """
    Embedding facts for one parameter set.

    Attributes:
        target_p: integrability index p2 ≥ p of the Besov-to-Besov embedding
        besov_gamma: γ = 1 − (1/p − 1/p2)_+/β̃, or None when β̃ ≤ (1/p − 1/p2)_+
        besov_smoothness: γβ, the smoothness of the target space B^{γβ}_{p2,q}
        continuous: β̃ > 1/p (embedding into C^0)
        holder_gamma: γ = 1 − 1/(β̃p) when continuous
        holder_smoothness: γβ̲, the Hölder exponent of the embedding
        isotropic_holder: β isotropic with a non-integer β₀, so B^β_{∞,∞} = C^{β₀}
    """
    target_p: float
    besov_gamma: Optional[float] = None
    besov_smoothness: Optional[Tuple[float, ...]] = None
    continuous: bool
    holder_gamma: Optional[float] = None
    holder_smoothness: Optional[float] = None
    isotropic_holder: bool
    notes: List[str] = []


def embedding_report(params: BesovParams, target_p: Optional[float] = None) -> EmbeddingReport:
    """
    Evaluate the embedding conditions of B^β_{p,q} for the given parameters.

    target_p defaults to the error-norm index r.
    """
    beta = params.beta
    p2 = params.r if target_p is None else target_p
    notes: List[str] = []
    if p2 < params.p:
        notes.append(f"target_p={p2} is below p={params.p}; the Besov embedding is stated for p2 >= p")

    gap = max(reciprocal(params.p) - reciprocal(p2), 0)
    besov_gamma = None
    besov_smoothness = None
    if beta.beta_tilde_exact > gap:
        gamma = 1 - gap / beta.beta_tilde_exact
        besov_gamma = float(gamma)
        besov_smoothness = tuple(float(gamma * b) for b in beta.exact)
    else:
        notes.append("beta_tilde does not exceed (1/p - 1/p2)_+; no Besov embedding")

    continuous = beta.beta_tilde_exact > reciprocal(params.p)
    holder_gamma = None
    holder_smoothness = None
    if continuous:
        gamma = 1 - reciprocal(params.p) / beta.beta_tilde_exact
        holder_gamma = float(gamma)
        holder_smoothness = float(gamma * beta.beta_min_exact)
    else:
        notes.append("beta_tilde <= 1/p; elements need not be continuous")

    b0 = beta.beta[0]
    isotropic = all(b == b0 for b in beta.beta)
    isotropic_holder = isotropic and not float(b0).is_integer() and math.isinf(params.p) and math.isinf(params.q)

    return EmbeddingReport(
        target_p=p2,
        besov_gamma=besov_gamma,
        besov_smoothness=besov_smoothness,
        continuous=continuous,
        holder_gamma=holder_gamma,
        holder_smoothness=holder_smoothness,
        isotropic_holder=isotropic_holder,
        notes=notes,
    )
