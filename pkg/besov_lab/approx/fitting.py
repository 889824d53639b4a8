"""
Log-log slope fits shared by the approximation and estimation studies.
"""
import logging
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    residuals: np.ndarray
    sse: float


def fit_loglog_slope(budgets: Sequence[float], errors: Sequence[float]) -> SlopeFit:
    """
    Ordinary least squares of log(error) on log(budget).

    Raises:
        ConfigurationError: fewer than two distinct budgets, or a
            nonpositive budget or error
    """
    x = np.asarray(budgets, dtype=np.float64)
    y = np.asarray(errors, dtype=np.float64)
    if len(x) != len(y):
        raise ConfigurationError(f"{len(x)} budgets but {len(y)} errors")
    if len(np.unique(x)) < 2:
        raise ConfigurationError("a log-log fit needs at least two distinct budgets")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ConfigurationError("budgets and errors must be positive for a log-log fit")
    lx, ly = np.log(x), np.log(y)
    fit = stats.linregress(lx, ly)
    residuals = ly - (fit.intercept + fit.slope * lx)
    return SlopeFit(float(fit.slope), float(fit.intercept), residuals, float(np.sum(residuals**2)))


def relative_deviation(fitted: float, theory: float) -> float:
    """|fitted − theory| / |theory|."""
    if theory == 0:
        return abs(fitted)
    return abs(fitted - theory) / abs(theory)
