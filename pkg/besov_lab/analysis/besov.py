"""
Besov sequence norm, level projections and the modulus of smoothness.

Components:
  - sequence_norm: the b^β_{p,q} quasi-norm of a coefficient set, with level
    weight 2^{kβ̲ − ‖k‖/p} and sup-norms for p = ∞ or q = ∞
  - quasi_project: discrete least-squares projection of a function onto the
    level-k spline span, computed on an oversampled tensor grid
  - telescoped_coeffs: the multilevel decomposition p_k = P_k f − P_{k−1} f
  - modulus_of_smoothness: a Monte Carlo estimate of the r-th modulus of
    smoothness over a fixed, nested direction set

The projection is separable. On each axis the grid has a fixed number of
points per dyadic cell, and the axis design matrix B_i holds the 1-D
B-splines N_m(2^{s_i} t − j_i) that do not vanish on [0, 1]. The tensor
least-squares solution is then the per-axis pseudo-inverse applied along
each axis of the sampled values, and the Gram condition number of the full
system is the product of the per-axis ones.

Used by:
  - approx: the decomposition behind adaptive approximation
  - synth: normalization of generated targets
  - cli: the norm-equivalence diagnostics
"""
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb
from scipy.stats import qmc

from ..bspline.core import eval_cardinal_bspline, level_scales, level_shape
from ..errors import ConfigurationError, IllConditionedError
from ..models.smoothness import BesovParams, reciprocal
from ..models.sparse_coeffs import SparseCoeffs, coeffs_from_level_array

logger = logging.getLogger(__name__)

# Refuse to trust a projection whose Gram condition estimate exceeds this
DEFAULT_CONDITION_LIMIT = 1e12

# Minimum grid points per dyadic cell and axis
DEFAULT_OVERSAMPLE = 4

# Directions of the modulus-of-smoothness estimate (a Sobol set of 2^12)
DEFAULT_DIRECTIONS = 4096

# Axis-aligned direction grid size per axis and sign
_AXIS_STEPS = 64

Function = Callable[[np.ndarray], np.ndarray]


# ----------------------------------------------------------------------
# Sequence norm
# ----------------------------------------------------------------------

def level_weight_exponent(k: int, params: BesovParams) -> float:
    """Exponent of the level weight 2^{kβ̲ − ‖k‖/p} (1/∞ = 0)."""
    norm_k = sum(level_scales(k, params.beta))
    return float(k * params.beta.beta_min_exact - norm_k * reciprocal(params.p))


def _pnorm(values: np.ndarray, p: float) -> float:
    if len(values) == 0:
        return 0.0
    a = np.abs(values)
    if math.isinf(p):
        return float(np.max(a))
    top = float(np.max(a))
    if top == 0.0:
        return 0.0
    return top * float(np.sum((a / top) ** p)) ** (1.0 / p)


def level_contributions(coeffs: SparseCoeffs) -> List[Tuple[int, float]]:
    """(k, 2^{kβ̲ − ‖k‖/p}·‖α_{k,·}‖_p) for every populated level."""
    params = coeffs.params
    out = []
    for k in coeffs.levels:
        _, values = coeffs.level_linear(k)
        inner = _pnorm(values, params.p)
        out.append((k, 2.0 ** level_weight_exponent(k, params) * inner))
    return out


def sequence_norm(coeffs: SparseCoeffs) -> float:
    """
    ‖(α_{k,j})‖_{b^β_{p,q}} of a finite coefficient set.

    For p or q below one the formula is evaluated as written (a quasi-norm).
    An empty set has norm 0.
    """
    terms = np.array([c for _, c in level_contributions(coeffs)])
    return _pnorm(terms, coeffs.params.q)


# ----------------------------------------------------------------------
# Level projection
# ----------------------------------------------------------------------

def _axis_grid(s: int, m: int, oversample: int) -> np.ndarray:
    per_cell = max(oversample, m + 1)
    n = (2**s) * per_cell
    return (np.arange(n) + 0.5) / n


def _axis_design(s: int, m: int, t: np.ndarray) -> np.ndarray:
    """Columns N_m(2^s t − j) for j = −m, ..., 2^s − 1."""
    j = np.arange(-m, 2**s)
    return eval_cardinal_bspline(m, (2.0**s) * t[:, None] - j[None, :])


def _apply_axes(tensor: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Contract axis i of `tensor` with mats[i] (mats[i] @ tensor along axis i)."""
    out = tensor
    for axis, mat in enumerate(mats):
        out = np.moveaxis(np.tensordot(mat, out, axes=(1, axis)), 0, axis)
    return out


def _tensor_points(axes: Sequence[np.ndarray]) -> np.ndarray:
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _embed_active(active: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Pad the active block with the identically-vanishing j_i = 2^{s_i} slice."""
    full = np.zeros(shape)
    full[tuple(slice(0, n) for n in active.shape)] = active
    return full


class _LevelGrid:
    """Oversampled tensor grid and per-axis designs of one level."""

    def __init__(self, k: int, params: BesovParams, oversample: int):
        self.k = k
        self.scales = level_scales(k, params.beta)
        self.shape = level_shape(k, params.beta, params.m)
        self.axes = [_axis_grid(s, params.m, oversample) for s in self.scales]
        self.designs = [_axis_design(s, params.m, t) for s, t in zip(self.scales, self.axes)]
        self._pinvs: Optional[List[np.ndarray]] = None

    @property
    def size(self) -> int:
        return int(np.prod([len(t) for t in self.axes]))

    def condition(self) -> float:
        cond = 1.0
        for design in self.designs:
            cond *= float(np.linalg.cond(design)) ** 2
        return cond

    def solve(self, values: np.ndarray, cond_limit: float) -> np.ndarray:
        """Least-squares coefficients over J(k) of sampled grid values."""
        if self._pinvs is None:
            cond = self.condition()
            logger.debug(f"Level {self.k}: {self.size} grid points, Gram condition {cond:.3e}")
            if not np.isfinite(cond) or cond > cond_limit:
                raise IllConditionedError(self.k, cond, cond_limit)
            self._pinvs = [np.linalg.pinv(design) for design in self.designs]
        return _embed_active(_apply_axes(values, self._pinvs), self.shape)

    def sample(self, f: Function) -> np.ndarray:
        values = np.asarray(f(_tensor_points(self.axes)), dtype=np.float64)
        return values.reshape(tuple(len(t) for t in self.axes))


def quasi_project(
    f: Function,
    k: int,
    params: BesovParams,
    oversample: int = DEFAULT_OVERSAMPLE,
    cond_limit: float = DEFAULT_CONDITION_LIMIT,
) -> np.ndarray:
    """
    Level-k discrete least-squares projection P_k f.

    Args:
        f: callable on (n, d) arrays returning (n,) values
        k: level
        params: Besov parameters (β and m are used)
        oversample: grid points per dyadic cell per axis (at least m + 1 are used)
        cond_limit: largest acceptable Gram condition estimate

    Returns:
        Coefficients over J(k) as a dense array of shape level_shape(k). The
        entries with j_i = 2^{s_i} belong to bases vanishing on [0,1]^d and are 0.

    Raises:
        IllConditionedError: when the condition estimate exceeds cond_limit
    """
    grid = _LevelGrid(k, params, oversample)
    return grid.solve(grid.sample(f), cond_limit)


def _eval_level_on_grid(coeff_tensor: np.ndarray, coarse_k: int, grid: _LevelGrid, params: BesovParams) -> np.ndarray:
    """Evaluate a level-coarse_k series given as a dense tensor on a finer level's grid."""
    coarse_scales = level_scales(coarse_k, params.beta)
    active = coeff_tensor[tuple(slice(0, 2**s + params.m) for s in coarse_scales)]
    mats = [_axis_design(s, params.m, t) for s, t in zip(coarse_scales, grid.axes)]
    return _apply_axes(active, mats)


def telescoped_coeffs(
    f: Function,
    K_max: int,
    params: BesovParams,
    oversample: int = DEFAULT_OVERSAMPLE,
    cond_limit: float = DEFAULT_CONDITION_LIMIT,
    prune_tol: float = 0.0,
) -> SparseCoeffs:
    """
    Multilevel coefficients α_{k,·} of p_k = P_k f − P_{k−1} f, k = 0..K_max.

    P_{−1} = 0. Level k is the projection onto level k of P_k f − P_{k−1} f;
    the spans are nested, so this equals a_k minus the exact level-k
    representation of P_{k−1} f, and Σ_{k ≤ K} p_k = P_K f.

    Entries with |α| ≤ prune_tol are omitted.
    """
    if K_max < 0:
        raise ConfigurationError(f"K_max must be nonnegative, got {K_max}")
    out = SparseCoeffs(params)
    previous: Optional[np.ndarray] = None
    for k in range(K_max + 1):
        grid = _LevelGrid(k, params, oversample)
        values = grid.sample(f)
        current = grid.solve(values, cond_limit)
        if previous is None:
            detail = current
        else:
            coarse_on_fine = _eval_level_on_grid(previous, k - 1, grid, params)
            detail = current - grid.solve(coarse_on_fine, cond_limit)
        if prune_tol > 0:
            detail = np.where(np.abs(detail) > prune_tol, detail, 0.0)
        coeffs_from_level_array(params, k, detail, existing=out)
        previous = current
        logger.debug(f"Level {k}: {int(np.count_nonzero(detail))} nonzero detail coefficients")
    return out


# ----------------------------------------------------------------------
# Modulus of smoothness
# ----------------------------------------------------------------------

def direction_set(
    t: Sequence[float],
    span: Optional[Sequence[float]] = None,
    n_directions: int = DEFAULT_DIRECTIONS,
    seed: int = 0,
) -> np.ndarray:
    """
    Directions h with |h_i| ≤ t_i drawn from a fixed pool.

    The pool is a scrambled Sobol set on span·[−1, 1]^d plus axis-aligned steps
    ±span_i·l/64 (l = 1..64); filtering the same pool by t makes the sets
    nested in t, so the estimate is monotone in t.
    """
    t = np.asarray(t, dtype=np.float64)
    span = t if span is None else np.asarray(span, dtype=np.float64)
    d = len(t)
    if np.any(t <= 0):
        raise ConfigurationError("every t_i must be positive")
    if len(span) != d:
        raise ConfigurationError(f"span has {len(span)} entries but t has {d}")
    sobol = qmc.Sobol(d=d, scramble=True, seed=seed)
    pool = (2.0 * sobol.random(n_directions) - 1.0) * span
    steps = span[None, :] * (np.arange(1, _AXIS_STEPS + 1) / _AXIS_STEPS)[:, None]
    axis_dirs = []
    for i in range(d):
        for sign in (1.0, -1.0):
            block = np.zeros((_AXIS_STEPS, d))
            block[:, i] = sign * steps[:, i]
            axis_dirs.append(block)
    pool = np.vstack([pool] + axis_dirs)
    keep = np.all(np.abs(pool) <= t[None, :] * (1 + 1e-12), axis=1)
    return pool[keep]


def finite_difference(f: Function, x: np.ndarray, h: np.ndarray, r_order: int) -> np.ndarray:
    """
    Δ_h^r f(x) for points x (n, d) and one direction h (d,).

    Set to zero where x + r·h leaves [0,1]^d.
    """
    inside = np.all((x + r_order * h >= 0.0) & (x + r_order * h <= 1.0), axis=1)
    out = np.zeros(len(x))
    if not np.any(inside):
        return out
    xs = x[inside]
    acc = np.zeros(len(xs))
    for l in range(r_order + 1):
        sign = -1.0 if (r_order - l) % 2 else 1.0
        acc += sign * comb(r_order, l, exact=True) * np.asarray(f(xs + l * h), dtype=np.float64)
    out[inside] = acc
    return out


def modulus_of_smoothness(
    f: Function,
    r_order: int,
    t: Sequence[float],
    p: float,
    n_samples: int = 512,
    seed: int = 0,
    n_directions: int = DEFAULT_DIRECTIONS,
    span: Optional[Sequence[float]] = None,
) -> float:
    """
    Estimate w_{r,p}(f, t) = sup_{|h_i| ≤ t_i} ‖Δ_h^r f‖_p.

    The sup runs over direction_set(t, span, n_directions, seed) and the
    L^p(Ω) norm over n_samples uniform points drawn with `seed`. Pass the
    same `span` for several t to compare estimates on nested direction sets.
    """
    if r_order < 1:
        raise ConfigurationError(f"r_order must be at least 1, got {r_order}")
    t_arr = np.asarray(t, dtype=np.float64)
    x = np.random.default_rng(seed).random((n_samples, len(t_arr)))
    best = 0.0
    for h in direction_set(t_arr, span=span, n_directions=n_directions, seed=seed):
        diff = finite_difference(f, x, h, r_order)
        best = max(best, _lp_norm(diff, p))
    return best


def _lp_norm(values: np.ndarray, p: float) -> float:
    """L^p([0,1]^d) norm from equally weighted samples."""
    a = np.abs(values)
    if math.isinf(p):
        return float(np.max(a)) if len(a) else 0.0
    return float(np.mean(a**p)) ** (1.0 / p)
