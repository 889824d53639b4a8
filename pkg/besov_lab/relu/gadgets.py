"""
ReLU gadgets: squaring, multiplication and the cardinal B-spline unit.

  - square_network(s): sawtooth approximation of x² on [0, 1],
    x − Σ_{t≤s} g_t(x)/4^t with g_t the t-fold tent map; error ≤ 2^{−2s−2}.
  - multiply_network(s): xy = 2((x+y)/2)² − x²/2 − y²/2 on inputs clamped
    into [0, 1]; error ≤ 3·2^{−2s−2}.
  - univariate_bspline_network(m, s): N_m from its truncated-power pieces.
    Both halves of the support are folded onto [0, (m+1)/2] so that only
    the positive, well-conditioned pieces are used, then
    N_m(x) = P(min(x, c)) + P(min(m+1−x, c)) − N_m(c).
  - build_bspline_net(m, d, eps): tensor product of d univariate units by a
    balanced multiplication tree, gated by min(1, x_i, m+1−x_i) so that the
    output is exactly zero off [0, m+1]^d. The precision s is raised until
    the measured sup-error on a dense grid is at most eps/2.
  - assemble_approximant(coeffs, eps_unit): one verified unit replicated per
    coefficient with input map 2^{s_i} x_i − j_i and output weight α_{k,j}.

Used by: cli/main.py (net-synth), tests/test_relu.py
"""
import logging
import math
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.special import comb, factorial
from scipy.stats import qmc

from ..bspline.core import eval_cardinal_bspline, level_scales
from ..errors import ConfigurationError, SynthesisError
from ..models.sparse_coeffs import SparseCoeffs
from .network import (
    ReluNetwork,
    affine_network,
    clip_unit_network,
    identity_network,
    linear_readout,
    parallel,
    precompose_affine,
    sequential,
    zero_network,
)

logger = logging.getLogger(__name__)

# Largest precision tried before synthesis gives up
MAX_PRECISION = 30

# Fraction of eps the measured error must stay under
CERTIFICATION_MARGIN = 0.5

# Verification grid: points per axis for d ≤ 3, Sobol points (2^17) beyond
GRID_POINTS_PER_AXIS = 64
SOBOL_LOG2_POINTS = 17
MAX_GRID_DIM = 3

# Guard on the dense parameter count of an assembled approximant
DEFAULT_MAX_DENSE = 2 * 10**7


# ----------------------------------------------------------------------
# Squaring and multiplication
# ----------------------------------------------------------------------

def square_error_bound(s: int) -> float:
    return 2.0 ** (-2 * s - 2)


def multiply_error_bound(s: int) -> float:
    return 3.0 * square_error_bound(s)


def square_network(s: int) -> ReluNetwork:
    """
    Approximate x ↦ x² on [0, 1] with s sawtooth layers.

    Hidden layer t carries η(g), η(g − ½), η(g − 1) for the current tent
    iterate g plus a running accumulator, which stays ≥ 0 because it is
    the piecewise-linear interpolant of x² on a dyadic grid.
    """
    if s < 0:
        raise ConfigurationError(f"precision must be nonnegative, got {s}")
    if s == 0:
        return affine_network(np.eye(1))
    tent = np.array([2.0, -4.0, 2.0, 0.0])
    layers = [(np.array([[1.0], [1.0], [1.0], [1.0]]), np.array([0.0, -0.5, -1.0, 0.0]))]
    for t in range(1, s):
        scale = 4.0**t
        weight = np.vstack([tent, tent, tent, [-2.0 / scale, 4.0 / scale, -2.0 / scale, 1.0]])
        layers.append((weight, np.array([0.0, -0.5, -1.0, 0.0])))
    scale = 4.0**s
    layers.append((np.array([[-2.0 / scale, 4.0 / scale, -2.0 / scale, 1.0]]), np.zeros(1)))
    return ReluNetwork(layers)


def multiply_network(s: int) -> ReluNetwork:
    """(x, y) ↦ ≈ clamp(x)·clamp(y) with clamp onto [0, 1]."""
    square = square_network(s)
    return sequential(
        clip_unit_network(2),
        affine_network(np.array([[0.5, 0.5], [1.0, 0.0], [0.0, 1.0]])),
        parallel([square, square, square], shared_input=False),
        affine_network(np.array([[2.0, -0.5, -0.5]])),
    )


def power_network(m: int, s: int) -> ReluNetwork:
    """z ↦ ≈ clamp(z)^m by a chain of m − 1 multiplications."""
    if m < 1:
        raise ConfigurationError(f"power must be at least 1, got {m}")
    if m == 1:
        return clip_unit_network(1)
    product = multiply_network(s)
    net = affine_network(np.array([[1.0], [1.0]]))
    for step in range(2, m + 1):
        if step == m:
            net = sequential(net, product)
        else:
            carry = affine_network(np.array([[0.0, 1.0]]))
            net = sequential(net, parallel([product, carry], shared_input=True))
    return net


def product_tree_network(n_factors: int, s: int) -> ReluNetwork:
    """Π of n_factors inputs through a balanced tree of multiplications."""
    if n_factors < 1:
        raise ConfigurationError("a product needs at least one factor")
    if n_factors == 1:
        return identity_network(1)
    net: Optional[ReluNetwork] = None
    width = n_factors
    while width > 1:
        pieces: List[ReluNetwork] = [multiply_network(s) for _ in range(width // 2)]
        if width % 2:
            pieces.append(identity_network(1))
        level = parallel(pieces, shared_input=False)
        net = level if net is None else sequential(net, level)
        width = width // 2 + width % 2
    return net


# ----------------------------------------------------------------------
# Cardinal B-spline unit
# ----------------------------------------------------------------------

def _piece_weights(m: int) -> np.ndarray:
    """(−1)^i C(m+1, i) / m! for the truncated powers left of the midpoint."""
    c = (m + 1) / 2.0
    count = int(math.ceil(c))
    i = np.arange(count)
    return ((-1.0) ** i) * comb(m + 1, i, exact=False) / factorial(m, exact=True)


def univariate_bspline_network(m: int, s: int) -> ReluNetwork:
    """
    One-dimensional N_m on R from folded truncated powers.

    With c = (m+1)/2, u = min(x, c) and v = min(m+1−x, c), the pieces
    t_i = η(u − i) for i < c give P(u) = Σ_i w_i t_i^m, and
    N_m(x) = P(u) + P(v) − N_m(c). Powers are taken of t_i / c ∈ [0, 1].
    """
    if m < 1:
        raise ConfigurationError(f"spline order must be at least 1 for a ReLU unit, got {m}")
    c = (m + 1) / 2.0
    weights = _piece_weights(m)
    count = len(weights)
    # h = [η(x), η(−x), η(x − c), η(c − x)]; u = h0 − h1 − h2, v = m+1 − h0 + h1 − h3
    first = (np.array([[1.0], [-1.0], [1.0], [-1.0]]), np.array([0.0, 0.0, -c, c]))
    u_row = np.array([1.0, -1.0, -1.0, 0.0])
    v_row = np.array([-1.0, 1.0, 0.0, -1.0])
    rows = [u_row / c for _ in range(count)] + [v_row / c for _ in range(count)]
    shifts = [-i / c for i in range(count)] + [(m + 1 - i) / c for i in range(count)]
    scaled = ReluNetwork([first, (np.vstack(rows), np.array(shifts))])

    powers = parallel([power_network(m, s) for _ in range(2 * count)], shared_input=False)
    readout = np.concatenate([weights, weights]) * c**m
    peak = float(eval_cardinal_bspline(m, c))
    return sequential(scaled, powers, affine_network(readout.reshape(1, -1), np.array([-peak])))


def _min2_network() -> ReluNetwork:
    """(a, b) ↦ min(a, b) = η(b) − η(−b) − η(b − a)."""
    return ReluNetwork([
        (np.array([[0.0, 1.0], [0.0, -1.0], [-1.0, 1.0]]), np.zeros(3)),
        (np.array([[1.0, -1.0, -1.0]]), np.zeros(1)),
    ])


def min_network(n_inputs: int) -> ReluNetwork:
    """Minimum of n_inputs values by a balanced tree of two-input minima."""
    if n_inputs == 1:
        return identity_network(1)
    net: Optional[ReluNetwork] = None
    width = n_inputs
    while width > 1:
        pieces: List[ReluNetwork] = [_min2_network() for _ in range(width // 2)]
        if width % 2:
            pieces.append(identity_network(1, 2))
        level = parallel(pieces, shared_input=False)
        net = level if net is None else sequential(net, level)
        width = width // 2 + width % 2
    return net


def support_gate_network(m: int, d: int) -> ReluNetwork:
    """x ↦ min(1, x_1, m+1−x_1, ..., x_d, m+1−x_d); negative exactly off the support."""
    eye = np.eye(d)
    spread = np.vstack([np.zeros((1, d)), eye, -eye])
    shift = np.concatenate([[1.0], np.zeros(d), np.full(d, float(m + 1))])
    return sequential(affine_network(spread, shift), min_network(2 * d + 1))


def _gate_output_network() -> ReluNetwork:
    """(a, g) ↦ η(a − η(a − g)) = η(min(a, g))."""
    return ReluNetwork([
        (np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, -1.0]]), np.zeros(3)),
        (np.array([[1.0, -1.0, -1.0]]), np.zeros(1)),
        (np.array([[1.0]]), np.zeros(1)),
    ])


def tensor_bspline_network(m: int, d: int, s: int) -> ReluNetwork:
    """Gated tensor-product unit Ṁ ≈ Π_i N_m(x_i) at precision s."""
    units = parallel([univariate_bspline_network(m, s) for _ in range(d)], shared_input=False)
    product = sequential(units, product_tree_network(d, s))
    gated = parallel([product, support_gate_network(m, d)], shared_input=True)
    return sequential(gated, _gate_output_network())


def exact_tensor_bspline(m: int, x: np.ndarray) -> np.ndarray:
    out = np.ones(len(x))
    for i in range(x.shape[1]):
        out *= eval_cardinal_bspline(m, x[:, i])
    return out


def verification_points(m: int, d: int, seed: int = 0) -> np.ndarray:
    """Dense points on [−½, m + 3/2]^d: a 64^d grid for d ≤ 3, Sobol beyond."""
    lo, hi = -0.5, m + 1.5
    if d <= MAX_GRID_DIM:
        axis = np.linspace(lo, hi, GRID_POINTS_PER_AXIS)
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    return qmc.scale(sampler.random_base2(SOBOL_LOG2_POINTS), [lo] * d, [hi] * d)


class BSplineUnit(NamedTuple):
    network: ReluNetwork
    m: int
    d: int
    eps: float
    precision: int
    measured_error: float
    points_checked: int


def _initial_precision(eps: float) -> int:
    return max(1, int(math.ceil(0.5 * math.log2(1.0 / eps))))


def build_bspline_net(m: int, d: int, eps: float, seed: int = 0, max_size: int = 64) -> BSplineUnit:
    """
    Synthesize Ṁ with measured ‖M^d_{0,0} − Ṁ‖_∞ ≤ eps and Ṁ = 0 off [0, m+1]^d.

    Raises:
        ConfigurationError: m < 1, eps outside (0, 1), or d·m above max_size
        SynthesisError: no precision up to MAX_PRECISION passes, or the
            support contract fails; carries the worst point
    """
    if m < 1:
        raise ConfigurationError(f"spline order must be at least 1 (N_0 is discontinuous), got {m}")
    if not 0.0 < eps < 1.0:
        raise ConfigurationError(f"eps must lie in (0, 1), got {eps}")
    if d < 1 or d * m > max_size:
        raise ConfigurationError(f"d·m = {d * m} is outside the supported range 1..{max_size}")

    points = verification_points(m, d, seed)
    exact = exact_tensor_bspline(m, points)
    outside = np.any((points < 0.0) | (points > m + 1), axis=1)
    target = CERTIFICATION_MARGIN * eps

    s = _initial_precision(eps)
    worst_point, worst_error = None, math.inf
    while s <= MAX_PRECISION:
        net = tensor_bspline_network(m, d, s)
        values = net.scalar(points)
        leaked = outside & (values != 0.0)
        if np.any(leaked):
            at = int(np.flatnonzero(leaked)[0])
            raise SynthesisError(
                f"network is nonzero outside [0, {m + 1}]^d", point=points[at].tolist(), measured=float(values[at])
            )
        errors = np.abs(values - exact)
        at = int(np.argmax(errors))
        worst_point, worst_error = points[at], float(errors[at])
        logger.debug(f"B-spline unit m={m}, d={d}, s={s}: depth {net.depth}, sup-error {worst_error:.3e}")
        if worst_error <= target:
            logger.info(f"Synthesized B-spline unit m={m}, d={d} at precision {s}: {net!r}, error {worst_error:.3e}")
            return BSplineUnit(net, m, d, eps, s, worst_error, len(points))
        s += 1
    raise SynthesisError(
        f"no precision up to {MAX_PRECISION} reaches sup-error {target:.3e} for m={m}, d={d}",
        point=worst_point.tolist(),
        measured=worst_error,
    )


# ----------------------------------------------------------------------
# Series approximant
# ----------------------------------------------------------------------

class Approximant(NamedTuple):
    network: ReluNetwork
    unit: Optional[BSplineUnit]
    entries: int
    error_bound: float
    local_bound: float


def local_active_count(coeffs: SparseCoeffs, x: np.ndarray) -> np.ndarray:
    """Number of stored entries whose basis support contains each point."""
    beta, m = coeffs.params.beta, coeffs.params.m
    counts = np.zeros(len(x), dtype=np.int64)
    for k in coeffs.levels:
        js, _ = coeffs.level(k)
        dil = np.array([2.0**s for s in level_scales(k, beta)])
        t = x * dil
        for j in js:
            counts += np.all((t > j) & (t < j + m + 1), axis=1)
    return counts


def assemble_approximant(
    coeffs: SparseCoeffs,
    eps_unit: float,
    seed: int = 0,
    max_dense: int = DEFAULT_MAX_DENSE,
) -> Approximant:
    """
    Network computing ≈ Σ α_{k,j} M^d_{k,j}(x).

    Each entry gets a copy of one verified unit with first layer
    precomposed by x ↦ diag(2^{s_i}) x − j; outputs are combined with
    weights α. Reported bounds: eps_unit·Σ|α| globally and
    (m+1)^d (K+1)·eps_unit·max|α| from overlapping supports.

    Raises:
        ConfigurationError: the dense parameter count would exceed max_dense
    """
    params = coeffs.params
    d, m = params.d, params.m
    if not coeffs:
        return Approximant(zero_network(d), None, 0, 0.0, 0.0)
    unit = build_bspline_net(m, d, eps_unit, seed=seed)
    n = len(coeffs)
    dense = sum(w.size for w, _ in unit.network.layers) * n * n
    if dense > max_dense:
        raise ConfigurationError(
            f"assembling {n} entries needs about {dense} dense parameters (limit {max_dense}); "
            "use fewer coefficients or raise the limit"
        )
    copies: List[ReluNetwork] = []
    alphas: List[float] = []
    for (k, j), alpha in coeffs.items():
        dil = np.diag([2.0**s for s in level_scales(k, params.beta)])
        copies.append(precompose_affine(unit.network, dil, -np.asarray(j, dtype=np.float64)))
        alphas.append(alpha)
    network = linear_readout(parallel(copies, shared_input=True), np.asarray(alphas))
    a = np.abs(np.asarray(alphas))
    error_bound = eps_unit * float(np.sum(a))
    local_bound = (m + 1) ** d * (coeffs.max_level + 1) * eps_unit * float(np.max(a))
    logger.info(f"Assembled approximant from {n} entries: {network!r}")
    return Approximant(network, unit, n, error_bound, local_bound)


def pointwise_bound(approximant: Approximant, coeffs: SparseCoeffs, x: np.ndarray) -> np.ndarray:
    """Per-point bound: active entries at x (capped) × eps_unit × max|α|."""
    if approximant.unit is None:
        return np.zeros(len(x))
    m, d = coeffs.params.m, coeffs.params.d
    cap = (m + 1) ** d * (coeffs.max_level + 1)
    counts = np.minimum(local_active_count(coeffs, x), cap)
    return counts * approximant.unit.eps * coeffs.max_abs()


def verify_approximant(approximant: Approximant, coeffs: SparseCoeffs, x: np.ndarray) -> float:
    """Measured sup |net − series| on x; raises SynthesisError above the tracked bound."""
    measured = np.abs(approximant.network.scalar(x) - coeffs(x))
    if not len(measured):
        return 0.0
    at = int(np.argmax(measured))
    worst = float(measured[at])
    if worst > approximant.error_bound + 1e-12:
        raise SynthesisError(
            f"approximant error {worst:.3e} exceeds the tracked bound {approximant.error_bound:.3e}",
            point=x[at].tolist(),
            measured=worst,
        )
    return worst


