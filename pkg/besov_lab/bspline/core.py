"""
Cardinal B-splines and the anisotropic tensor-product basis.

The cardinal B-spline N_m of order m is the (m+1)-fold convolution of the
indicator of [0, 1]: a piecewise polynomial of degree m supported on
[0, m+1]. The level-k tensor basis dilates each axis independently:

    M^d_{k,j}(x) = Π_i N_m(2^{⌊kβ′_i⌋} x_i − j_i),    j ∈ J(k)

with J_i(k) = {−m, ..., 2^{⌊kβ′_i⌋}} per axis.

Evaluation uses the Cox–de Boor recursion on the uniform knots 0, 1, ..., m+1.
Series evaluation at scattered points only touches the (m+1)^d basis
functions whose support contains each point, level by level.

Functions here are pure and operate on numpy arrays; they are safe to call
from any number of worker threads.
"""
import itertools
import logging
from typing import Iterator, List, Tuple, Union

import numpy as np
from scipy import sparse

from ..errors import ConfigurationError, IndexCapError
from ..models.smoothness import LevelLocation, SmoothnessVec

logger = logging.getLogger(__name__)

# Default cap on |J(k)| before enumeration is refused
DEFAULT_INDEX_CAP = 10**8

# Points per chunk for scattered evaluation (bounds the (m+1)^d fan-out memory)
_EVAL_CHUNK = 8192

ArrayLike = Union[float, np.ndarray]


def eval_cardinal_bspline(m: int, x: ArrayLike) -> ArrayLike:
    """
    Evaluate N_m at x (scalar or array) with the Cox–de Boor recursion.

    N_0 is the indicator of [0, 1). For every order the result is exactly
    zero for x ≤ 0 and x ≥ m + 1.
    """
    if m < 0:
        raise ConfigurationError(f"spline order must be nonnegative, got {m}")
    scalar = np.ndim(x) == 0
    t = np.asarray(x, dtype=np.float64)

    # B_{i,0} on the knot interval [i, i+1)
    pieces = [((t >= i) & (t < i + 1)).astype(np.float64) for i in range(m + 1)]
    for order in range(1, m + 1):
        pieces = [
            ((t - i) * pieces[i] + (i + order + 1 - t) * pieces[i + 1]) / order
            for i in range(m + 1 - order)
        ]
    out = np.where((t <= 0.0) | (t >= m + 1), 0.0, pieces[0])
    if scalar:
        return float(out)
    return out


def level_scales(k: int, beta: SmoothnessVec) -> Tuple[int, ...]:
    """Per-axis exponents s_i = ⌊kβ′_i⌋ of level k."""
    if k < 0:
        raise ConfigurationError(f"level must be nonnegative, got {k}")
    return beta.scales(k)


def level_norm(k: int, beta: SmoothnessVec) -> int:
    """‖k‖_{β̲/β} = Σ_j ⌊kβ̲/β_j⌋."""
    return sum(level_scales(k, beta))


def level_shape(k: int, beta: SmoothnessVec, m: int) -> Tuple[int, ...]:
    """Per-axis sizes |J_i(k)| = 2^{s_i} + m + 1."""
    return tuple(2**s + m + 1 for s in level_scales(k, beta))


def index_cardinality(k: int, beta: SmoothnessVec, m: int) -> int:
    size = 1
    for n in level_shape(k, beta, m):
        size *= n
    return size


def index_set(
    k: int,
    beta: SmoothnessVec,
    m: int,
    cap: int = DEFAULT_INDEX_CAP,
) -> Iterator[Tuple[int, ...]]:
    """
    Lazily enumerate J(k) = J_1(k) × ... × J_d(k) in lexicographic order.

    Raises:
        IndexCapError: if |J(k)| exceeds `cap`
    """
    size = index_cardinality(k, beta, m)
    if size > cap:
        raise IndexCapError(k, size, cap)
    ranges = [range(-m, 2**s + 1) for s in level_scales(k, beta)]
    return itertools.product(*ranges)


def active_index_set(
    k: int,
    beta: SmoothnessVec,
    m: int,
    cap: int = DEFAULT_INDEX_CAP,
) -> np.ndarray:
    """
    Materialize the indices of J(k) whose basis function is not identically
    zero on [0,1]^d, i.e. j_i ≤ 2^{s_i} − 1 on every axis.

    Returns an (n, d) integer array in lexicographic order.
    """
    scales = level_scales(k, beta)
    size = 1
    for s in scales:
        size *= 2**s + m
    if size > cap:
        raise IndexCapError(k, size, cap)
    axes = [np.arange(-m, 2**s, dtype=np.int64) for s in scales]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def ravel_locations(indices: np.ndarray, shape: Tuple[int, ...], m: int) -> np.ndarray:
    """Row-major linear index of j over J(k); ordering matches lexicographic j."""
    offsets = np.asarray(indices, dtype=np.int64) + m
    if offsets.ndim == 1:
        offsets = offsets[None, :]
    return np.ravel_multi_index(tuple(offsets.T), shape).astype(np.int64)


def unravel_locations(lin: np.ndarray, shape: Tuple[int, ...], m: int) -> np.ndarray:
    """Inverse of ravel_locations: (n,) linear indices to an (n, d) j array."""
    if len(lin) == 0:
        return np.zeros((0, len(shape)), dtype=np.int64)
    coords = np.unravel_index(np.asarray(lin, dtype=np.int64), shape)
    return np.stack(coords, axis=1).astype(np.int64) - m


def _as_points(x: np.ndarray, d: int) -> Tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ConfigurationError(f"expected points of dimension {d}, got array of shape {np.shape(x)}")
    return pts, single


def eval_tensor_basis(kl: LevelLocation, beta: SmoothnessVec, m: int, x: np.ndarray) -> ArrayLike:
    """
    Evaluate M^d_{k,j} at one point (shape (d,)) or a batch (shape (n, d)).

    Raises:
        ConfigurationError: if x, j and beta disagree on the dimension
    """
    k, j = kl
    d = beta.d
    if len(j) != d:
        raise ConfigurationError(f"location j has {len(j)} entries but beta has {d}")
    pts, single = _as_points(x, d)
    scales = level_scales(k, beta)
    out = np.ones(len(pts))
    for i, s in enumerate(scales):
        out *= eval_cardinal_bspline(m, (2.0**s) * pts[:, i] - j[i])
    if single:
        return float(out[0])
    return out


def local_values(
    k: int, beta: SmoothnessVec, m: int, pts: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, Tuple[int, ...]]:
    """
    Per-axis active supports of level k at the points `pts` (n, d).

    Returns:
        base: (n, d) integers ⌊2^{s_i} x_i⌋; the active j_i are base_i − o, o = 0..m
        vals: (n, d, m+1) values N_m(2^{s_i} x_i − (base_i − o))
        scales: the level scales s_i
    """
    scales = level_scales(k, beta)
    dil = np.array([2.0**s for s in scales])
    t = pts * dil
    base = np.floor(t).astype(np.int64)
    vals = np.empty(pts.shape + (m + 1,))
    for o in range(m + 1):
        vals[:, :, o] = eval_cardinal_bspline(m, t - (base - o))
    return base, vals, scales


def level_design(
    k: int, beta: SmoothnessVec, m: int, pts: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Nonzero entries of the level-k design matrix at scattered points.

    Returns COO triplets (rows, cols, data) with cols the linear index over
    J(k) (see ravel_locations). Each row has at most (m+1)^d entries.
    """
    base, vals, scales = local_values(k, beta, m, pts)
    shape = tuple(2**s + m + 1 for s in scales)
    n, d = pts.shape
    upper = np.array([2**s for s in scales], dtype=np.int64)
    row_ids = np.arange(n, dtype=np.int64)
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    data: List[np.ndarray] = []
    for offsets in itertools.product(range(m + 1), repeat=d):
        o = np.asarray(offsets, dtype=np.int64)
        j = base - o
        weight = np.ones(n)
        for i in range(d):
            weight = weight * vals[:, i, offsets[i]]
        keep = (weight != 0.0) & np.all((j >= -m) & (j <= upper), axis=1)
        if not np.any(keep):
            continue
        rows.append(row_ids[keep])
        cols.append(ravel_locations(j[keep], shape, m))
        data.append(weight[keep])
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(data)


def basis_design(k: int, beta: SmoothnessVec, m: int, x: np.ndarray) -> sparse.csr_matrix:
    """
    Level-k design matrix at scattered points as a CSR matrix.

    Rows are points, columns the linear index over J(k); column c holds
    M^d_{k,j}(x_row) for the j that ravels to c.
    """
    pts, _ = _as_points(x, beta.d)
    rows, cols, data = level_design(k, beta, m, pts)
    n_cols = index_cardinality(k, beta, m)
    return sparse.csr_matrix((data, (rows, cols)), shape=(len(pts), n_cols))


def eval_series(coeffs, x: np.ndarray) -> np.ndarray:
    """
    Evaluate Σ_{(k,j)} α_{k,j} M^d_{k,j}(x) for a SparseCoeffs-like object.

    Only the (m+1)^d basis functions active at each point are looked up per
    level. Points outside [0,1]^d are evaluated by the same formula.
    """
    beta = coeffs.params.beta
    m = coeffs.params.m
    pts, single = _as_points(x, beta.d)
    out = np.zeros(len(pts))
    for start in range(0, len(pts), _EVAL_CHUNK):
        chunk = pts[start:start + _EVAL_CHUNK]
        acc = np.zeros(len(chunk))
        for k in coeffs.levels:
            rows, cols, data = level_design(k, beta, m, chunk)
            if len(rows) == 0:
                continue
            alpha = coeffs.lookup(k, cols)
            np.add.at(acc, rows, data * alpha)
        out[start:start + _EVAL_CHUNK] = acc
    if single:
        return out[:1]
    return out
