"""
Exception hierarchy for besov-lab.

Library code raises these; only the CLI converts them into process exit codes:
  - ConfigurationError (exit 1): bad parameters, dimension mismatches, caps
  - VerificationError  (exit 2): a constructed object failed its measured contract
  - NumericalError     (exit 3): ill-conditioned or singular linear systems
"""
from typing import Optional, Sequence


class BesovLabError(Exception):
    """Base class for every error raised by besov-lab."""

    exit_code = 3


class ConfigurationError(BesovLabError):
    """Invalid parameters, inconsistent dimensions or an unusable config file."""

    exit_code = 1


class IndexCapError(ConfigurationError):
    """Raised when an index set J(k) would exceed the configured cardinality cap."""

    def __init__(self, level: int, cardinality: int, cap: int):
        self.level = level
        self.cardinality = cardinality
        self.cap = cap
        super().__init__(
            f"J({level}) has {cardinality} elements, above the cap of {cap}"
        )


class VerificationError(BesovLabError):
    """A constructed object failed its measured contract."""

    exit_code = 2


class SynthesisError(VerificationError):
    """A synthesized ReLU network exceeded its sup-error or support contract."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None, measured: Optional[float] = None):
        self.point = None if point is None else [float(v) for v in point]
        self.measured = measured
        detail = message
        if self.point is not None:
            detail += f" (worst point {self.point}, measured {measured:.3e})"
        super().__init__(detail)


class NumericalError(BesovLabError):
    """Linear algebra failure inside a projection or a fit."""

    exit_code = 3


class IllConditionedError(NumericalError):
    """The level-k projection Gram system is too ill-conditioned to trust."""

    def __init__(self, level: int, condition: float, limit: float):
        self.level = level
        self.condition = condition
        self.limit = limit
        super().__init__(
            f"projection Gram system at level {level} has condition estimate "
            f"{condition:.3e} (limit {limit:.1e})"
        )


class SingularSystemError(NumericalError):
    """Normal equations of a series fit are singular."""


class KernelFactorizationError(NumericalError):
    """Cholesky factorization of a regularized kernel Gram matrix failed."""
