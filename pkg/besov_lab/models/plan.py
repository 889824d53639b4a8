"""
Budget schedule of the adaptive approximant.

An AdaptivePlan fixes which coefficients an adaptive approximant may keep:
every coefficient at levels k ≤ K, then at most n_k coefficients at each
tail level K < k ≤ K*, and nothing beyond K*.

    δ   = (1/p − 1/r)_+
    ν   = (β̃ − δ)/(2δ)                  (∞ when δ = 0)
    K*  = ⌈K(1 + 1/ν)⌉                  (K when δ = 0)
    n_k = ⌈2^{‖K‖ − ν(‖k‖ − ‖K‖)}⌉
    N   = ⌈2^{‖K‖}⌉

Plans are built by approx.adaptive.make_plan, which evaluates these in exact
rational arithmetic.
"""
import math
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict


class AdaptivePlan(BaseModel):
    """
    Attributes:
        K: base level; every coefficient at k ≤ K is kept
        delta: δ = (1/p − 1/r)_+
        nu: tail decay ν, math.inf in the non-adaptive regime δ = 0
        K_star: last tail level K*
        norm_K: ‖K‖_{β̲/β}
        N: ⌈2^{‖K‖}⌉, the nominal parameter count
        n_k: tail budgets by level, keys K+1..K*
    """

    model_config = ConfigDict(frozen=True)

    K: int
    delta: float
    nu: float
    K_star: int
    norm_K: int
    N: int
    n_k: Dict[int, int]

    @property
    def is_adaptive(self) -> bool:
        return self.K_star > self.K

    def budget(self, k: int) -> Optional[int]:
        """None for k ≤ K (keep all), n_k on the tail, 0 past K*."""
        if k <= self.K:
            return None
        return self.n_k.get(k, 0)

    def tail_total(self) -> int:
        return sum(self.n_k.values())

    def summary(self) -> Dict[str, object]:
        """JSON-safe description (ν = ∞ is reported as None)."""
        return {
            "K": self.K,
            "K_star": self.K_star,
            "delta": self.delta,
            "nu": None if math.isinf(self.nu) else self.nu,
            "norm_K": self.norm_K,
            "N": self.N,
            "tail_budget": self.tail_total(),
        }
