"""
Report models written by every study.

  - RatePoint: one (budget, error) measurement with its Monte Carlo standard error
  - RateReport: a fitted log-log slope against the exponent predicted by theory
  - ComparisonRow / ComparisonTable: paired per-n risks of several estimators

Reports hold only deterministic content. Wall time and timestamps are kept
out of them and written to a separate sidecar by the store, so serializing
the same study twice yields identical bytes.
"""
import json
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

# Status codes of a RateReport
STATUS_FITTED = "fitted"
STATUS_NOISE_FLOOR = "below-noise-floor"
STATUS_TOO_FEW = "too-few-points"

# Fewest points for which an exponent is reported
MIN_FIT_POINTS = 4


def canonical_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


class RatePoint(BaseModel):
    """
    Attributes:
        N: budget of the point (parameter count for approximation, sample size for estimation)
        error: measured error (L^r approximation error or mean L² risk)
        stderr: Monte Carlo standard error of `error`, if known
        kept: number of coefficients or bases actually used
        residual: log-log fit residual at this point
    """
    N: int
    error: float
    stderr: Optional[float] = None
    kept: Optional[int] = None
    residual: Optional[float] = None


class RateReport(BaseModel):
    """
    Fitted convergence exponent compared with the predicted one.

    exponent_fit, residual_sse and relative_deviation are present only when
    status is "fitted"; otherwise `reason` explains why.
    """
    experiment: str
    claim: str
    exponent_theory: float
    exponent_fit: Optional[float] = None
    intercept_fit: Optional[float] = None
    residual_sse: Optional[float] = None
    relative_deviation: Optional[float] = None
    status: str = STATUS_FITTED
    reason: Optional[str] = None
    points: List[RatePoint] = Field(default_factory=list)
    sidebar: Dict[str, float] = Field(default_factory=dict)
    plan: Dict[str, object] = Field(default_factory=dict)
    seed: int = 0
    config_hash: str = ""
    notes: List[str] = Field(default_factory=list)

    def within(self, tolerance: float) -> bool:
        """True when the fitted exponent is within a relative tolerance of theory."""
        if self.relative_deviation is None:
            return False
        return self.relative_deviation <= tolerance

    def to_json(self) -> str:
        return canonical_json(self.model_dump(mode="json"))


class ComparisonRow(BaseModel):
    """Per-n mean risk, its standard error and the per-seed risks of each estimator."""
    n: int
    mean: Dict[str, float]
    stderr: Dict[str, float]
    per_seed: Dict[str, List[float]]


class ComparisonTable(BaseModel):
    """Risks of several estimators on identical datasets (paired by seed)."""
    experiment: str = "compare"
    claim: str
    estimators: List[str]
    rows: List[ComparisonRow] = Field(default_factory=list)
    sidebar: Dict[str, float] = Field(default_factory=dict)
    seeds: List[int] = Field(default_factory=list)
    config_hash: str = ""
    notes: List[str] = Field(default_factory=list)

    def seed_wins(self, winner: str, loser: str, n: int) -> int:
        """Number of seeds at sample size n where `winner` had the lower risk."""
        for row in self.rows:
            if row.n == n:
                return sum(a < b for a, b in zip(row.per_seed[winner], row.per_seed[loser]))
        raise KeyError(f"no row for n={n}")

    def to_json(self) -> str:
        return canonical_json(self.model_dump(mode="json"))
