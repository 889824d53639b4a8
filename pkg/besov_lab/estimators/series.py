"""
Least-squares B-spline series estimators.

fit_nonadaptive_series keeps every basis function up to level K.
fit_adaptive_series is the computable stand-in for sparse-network least
squares: it mirrors the adaptive approximation schedule on data.

  1. Ridge least squares on all bases at levels k ≤ K.
  2. For each tail level K < k ≤ min(K*, max_tail_level), rank the bases
     touched by the data by their empirical marginal coefficient
     ⟨r, φ⟩ / ‖φ‖² against the step-1 residual r and keep the n_k largest
     (ties to the smaller linear index).
  3. Refit every kept basis jointly by ridge least squares.
  4. Clip predictions at F.

Only columns with at least one nonzero entry at the design points enter the
least-squares systems; untouched bases get no coefficient. Systems are
solved by sparse LU on the normal equations.
"""
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..approx.adaptive import select_top
from ..bspline.core import level_design, level_norm
from ..errors import ConfigurationError, SingularSystemError
from ..models.plan import AdaptivePlan
from ..models.smoothness import BesovParams
from ..models.sparse_coeffs import SparseCoeffs
from ..synth.targets import AffineMap
from .base import FittedModel, RegressionDataset

logger = logging.getLogger(__name__)

# Default ridge per sample (numerical stability only)
RIDGE_PER_SAMPLE = 1e-8


class SeriesModel(FittedModel):
    """Clipped B-spline series, optionally evaluated at A x + b."""

    def __init__(self, kind: str, coeffs: SparseCoeffs, clip_level: float,
                 input_map: Optional[AffineMap] = None, plan: Optional[AdaptivePlan] = None):
        super().__init__(clip_level)
        self.kind = kind
        self.coeffs = coeffs
        self.input_map = input_map
        self.plan = plan

    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        z = self.input_map(x) if self.input_map is not None else x
        return self.coeffs(z)

    def parameters(self) -> Dict[str, object]:
        out: Dict[str, object] = {"coefficients": self.coeffs.dumps(), "entries": len(self.coeffs)}
        if self.input_map is not None:
            out["input_map"] = {"A": self.input_map.A.tolist(), "b": self.input_map.b.tolist()}
        if self.plan is not None:
            out["plan"] = self.plan.summary()
        return out


class _Block:
    """Touched columns of one level: linear indices and the (n, c) design."""

    def __init__(self, k: int, lin: np.ndarray, design: sparse.csc_matrix):
        self.k = k
        self.lin = lin
        self.design = design


def _level_block(k: int, params: BesovParams, xs: np.ndarray) -> _Block:
    rows, cols, data = level_design(k, params.beta, params.m, xs)
    lin, local = np.unique(cols, return_inverse=True)
    design = sparse.csc_matrix((data, (rows, local)), shape=(len(xs), len(lin)))
    return _Block(k, lin, design)


def default_ridge(n: int) -> float:
    return RIDGE_PER_SAMPLE * n


def ridge_solve(design: sparse.spmatrix, ys: np.ndarray, ridge: float) -> np.ndarray:
    """
    argmin ‖y − Φc‖² + ridge·‖c‖² via sparse LU of ΦᵀΦ + ridge·I.

    Raises:
        SingularSystemError: the normal equations are singular (ridge = 0)
    """
    n_cols = design.shape[1]
    if n_cols == 0:
        return np.zeros(0)
    gram = (design.T @ design).tocsc() + ridge * sparse.identity(n_cols, format="csc")
    rhs = design.T @ ys
    try:
        solution = splu(gram.tocsc()).solve(np.asarray(rhs, dtype=np.float64))
    except RuntimeError as e:
        raise SingularSystemError(f"normal equations are singular ({e}); use ridge > 0") from e
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("normal equations produced non-finite coefficients; use ridge > 0")
    return solution


def _assemble(params: BesovParams, blocks: List[_Block], values: np.ndarray) -> SparseCoeffs:
    out = SparseCoeffs(params)
    start = 0
    for block in blocks:
        stop = start + len(block.lin)
        if len(block.lin):
            out.set_level_linear(block.k, block.lin, values[start:stop])
        start = stop
    return out


def _inputs(data: RegressionDataset, params: BesovParams, input_map: Optional[AffineMap]) -> np.ndarray:
    xs = input_map(data.xs) if input_map is not None else data.xs
    if xs.shape[1] != params.d:
        raise ConfigurationError(f"basis has dimension {params.d} but the inputs have {xs.shape[1]}")
    return xs


def _base_fit(
    xs: np.ndarray, ys: np.ndarray, K: int, params: BesovParams, ridge: float
) -> Tuple[List[_Block], np.ndarray]:
    blocks = [_level_block(k, params, xs) for k in range(K + 1)]
    design = sparse.hstack([b.design for b in blocks], format="csc")
    return blocks, ridge_solve(design, ys, ridge)


def fit_nonadaptive_series(
    data: RegressionDataset,
    K: int,
    F: float,
    ridge: Optional[float] = None,
    *,
    params: BesovParams,
    input_map: Optional[AffineMap] = None,
) -> SeriesModel:
    """
    Ridge least squares on every basis up to level K.

    Raises:
        SingularSystemError: singular normal equations with ridge = 0
    """
    if K < 0:
        raise ConfigurationError(f"K must be nonnegative, got {K}")
    lam = default_ridge(data.n) if ridge is None else ridge
    xs = _inputs(data, params, input_map)
    blocks, values = _base_fit(xs, data.ys, K, params, lam)
    coeffs = _assemble(params, blocks, values)
    logger.debug(f"Non-adaptive series K={K}: {len(coeffs)} bases from n={data.n}")
    return SeriesModel("nonadaptive-series", coeffs, F, input_map=input_map)


def default_max_tail_level(n: int, params: BesovParams) -> int:
    """Smallest k with 2^{‖k‖} ≥ n."""
    k = 0
    while 2 ** level_norm(k, params.beta) < n:
        k += 1
    return k


def fit_adaptive_series(
    data: RegressionDataset,
    plan: AdaptivePlan,
    F: float,
    ridge: Optional[float] = None,
    *,
    params: BesovParams,
    max_tail_level: Optional[int] = None,
    input_map: Optional[AffineMap] = None,
) -> SeriesModel:
    """
    Adaptive series least squares following `plan`.

    With an empty tail (δ = 0) this is fit_nonadaptive_series at plan.K.

    Raises:
        SingularSystemError: singular normal equations with ridge = 0
    """
    lam = default_ridge(data.n) if ridge is None else ridge
    xs = _inputs(data, params, input_map)
    blocks, values = _base_fit(xs, data.ys, plan.K, params, lam)
    top = default_max_tail_level(data.n, params) if max_tail_level is None else max_tail_level
    last = min(plan.K_star, top)
    if last <= plan.K:
        return SeriesModel("adaptive-series", _assemble(params, blocks, values), F, input_map=input_map, plan=plan)

    base_design = sparse.hstack([b.design for b in blocks], format="csc")
    residual = data.ys - base_design @ values
    kept: List[_Block] = list(blocks)
    for k in range(plan.K + 1, last + 1):
        budget = plan.budget(k) or 0
        if budget <= 0:
            continue
        block = _level_block(k, params, xs)
        if not len(block.lin):
            continue
        norms = np.asarray(block.design.multiply(block.design).sum(axis=0)).ravel()
        scores = np.asarray(block.design.T @ residual).ravel() / np.where(norms > 0, norms, 1.0)
        keep = select_top(block.lin, scores, budget)
        if len(keep):
            kept.append(_Block(k, block.lin[keep], block.design[:, keep]))
        logger.debug(f"Tail level {k}: kept {len(keep)} of {len(block.lin)} touched bases (budget {budget})")

    if len(kept) == len(blocks):
        coeffs = _assemble(params, blocks, values)
    else:
        design = sparse.hstack([b.design for b in kept], format="csc")
        coeffs = _assemble(params, kept, ridge_solve(design, data.ys, lam))
    logger.debug(f"Adaptive series K={plan.K}, K*={plan.K_star}: {len(coeffs)} bases from n={data.n}")
    return SeriesModel("adaptive-series", coeffs, F, input_map=input_map, plan=plan)
