"""
Quadrature nodes and L^r norms on the unit cube.

Grid rules are midpoint tensor grids with equal weights; Monte Carlo rules
draw seeded uniform points. Both return equally weighted nodes, so norms are
plain means over the node values. Monte Carlo estimates also carry a
standard error.
"""
import logging
import math
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..models.config import QuadratureSpec

logger = logging.getLogger(__name__)

# Node batch size when evaluating a function on a quadrature rule
_BATCH = 1 << 15


class NormEstimate(NamedTuple):
    value: float
    stderr: Optional[float]


def quadrature_nodes(d: int, quad: QuadratureSpec) -> np.ndarray:
    kind = quad.resolved_kind(d)
    if kind == "grid":
        axis = (np.arange(quad.grid_points) + 0.5) / quad.grid_points
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)
    rng = np.random.default_rng(quad.seed)
    return rng.random((quad.n_mc, d))


def evaluate_on(f: Callable[[np.ndarray], np.ndarray], nodes: np.ndarray) -> np.ndarray:
    out = np.empty(len(nodes))
    for start in range(0, len(nodes), _BATCH):
        out[start:start + _BATCH] = np.asarray(f(nodes[start:start + _BATCH]), dtype=np.float64)
    return out


def lr_norm(values: np.ndarray, r: float, monte_carlo: bool = False) -> NormEstimate:
    """
    L^r norm from equally weighted node values; r = ∞ gives the maximum.

    With monte_carlo=True the standard error of the mean of |v|^r is
    propagated through t ↦ t^{1/r}.
    """
    a = np.abs(values)
    if math.isinf(r):
        return NormEstimate(float(np.max(a)) if len(a) else 0.0, None)
    powered = a**r
    mean = float(np.mean(powered))
    value = mean ** (1.0 / r)
    if not monte_carlo or len(a) < 2:
        return NormEstimate(value, None)
    se_mean = float(np.std(powered, ddof=1)) / math.sqrt(len(a))
    if mean == 0.0:
        return NormEstimate(value, 0.0)
    return NormEstimate(value, se_mean * value / (r * mean))
