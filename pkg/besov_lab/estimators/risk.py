"""
Monte Carlo estimate of the L²(P_X) risk ∫ (f̂ − f)² dP_X.
"""
import logging
import math
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..errors import ConfigurationError
from .base import Sampler, UniformSampler

logger = logging.getLogger(__name__)

MIN_TEST_POINTS = 1000

# Evaluation batch size
_BATCH = 1 << 15


class RiskEstimate(NamedTuple):
    value: float
    stderr: float


def empirical_risk(
    model: Callable[[np.ndarray], np.ndarray],
    f_true: Callable[[np.ndarray], np.ndarray],
    px_sampler: Optional[Sampler],
    n_test: int,
    seed: int,
    d: Optional[int] = None,
) -> RiskEstimate:
    """
    Mean of (model − f_true)² over n_test seeded draws from P_X, with its
    standard error.

    Raises:
        ConfigurationError: n_test below MIN_TEST_POINTS or an unknown dimension
    """
    if n_test < MIN_TEST_POINTS:
        raise ConfigurationError(f"n_test must be at least {MIN_TEST_POINTS}, got {n_test}")
    dim = d if d is not None else getattr(f_true, "d", None)
    if dim is None:
        raise ConfigurationError("empirical_risk needs the input dimension d")
    rng = np.random.default_rng(seed)
    xs = (px_sampler or UniformSampler()).sample(n_test, dim, rng)
    sq = np.empty(n_test)
    for start in range(0, n_test, _BATCH):
        chunk = xs[start:start + _BATCH]
        diff = np.asarray(model(chunk), dtype=np.float64) - np.asarray(f_true(chunk), dtype=np.float64)
        sq[start:start + _BATCH] = diff * diff
    value = float(np.mean(sq))
    stderr = float(np.std(sq, ddof=1)) / math.sqrt(n_test)
    return RiskEstimate(value, stderr)
