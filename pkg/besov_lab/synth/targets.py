"""
Synthetic ground-truth targets with controlled anisotropic Besov parameters.

Generators (all deterministic per seed):
  - random_series_target: random unit-ball series with level contributions
    decaying like 2^{−decay·k}
  - spike_target: a few isolated high-level bumps over a coarse background,
    the spatially inhomogeneous family (small p)
  - vg_bump_target / random_vg_family: Δ·w_j sign-free patterns on a
    disjoint-support sub-lattice of J(k)
  - affine_target: h(A x + b) with a corner-checked range
  - deep_target: clipped compositions h_H ∘ ... ∘ h_1

build_target turns a TargetSpec into a Target, the callable every study
consumes. A Target carries `.coeffs` when it is a pure series on one basis
and `.affine` when its input passes through an affine map first.

Used by: cli/main.py, approx/adaptive.py (via Target.coeffs), estimators/study.py
"""
import logging
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ..analysis.besov import sequence_norm
from ..bspline.core import DEFAULT_INDEX_CAP, active_index_set, eval_cardinal_bspline, level_scales
from ..errors import ConfigurationError
from ..models.config import StageSpec, TargetSpec
from ..models.smoothness import BesovParams, SmoothnessVec
from ..models.sparse_coeffs import SparseCoeffs

logger = logging.getLogger(__name__)

Function = Callable[[np.ndarray], np.ndarray]

# Level of the spikes when none is configured
DEFAULT_SPIKE_LEVEL = 4

# Slack allowed when checking that an affine map lands in the unit cube
_RANGE_TOL = 1e-12


class Target:
    """
    A function on [0,1]^d.

    Attributes:
        d: ambient input dimension
        kind: generator name
        coeffs: the defining series when the target is one, else None
        params: Besov parameters of the defining (or inner) series
        affine: the input map of an affine composition, else None
        inner: the function applied after `affine`
    """

    def __init__(
        self,
        fn: Function,
        d: int,
        kind: str,
        coeffs: Optional[SparseCoeffs] = None,
        params: Optional[BesovParams] = None,
        affine: Optional["AffineMap"] = None,
        inner: Optional[Function] = None,
    ):
        self._fn = fn
        self.d = d
        self.kind = kind
        self.coeffs = coeffs
        self.params = params if params is not None else (coeffs.params if coeffs is not None else None)
        self.affine = affine
        self.inner = inner
        self.stages: Optional[list] = None

    @classmethod
    def from_series(cls, coeffs: SparseCoeffs, kind: str = "series") -> "Target":
        return cls(coeffs, coeffs.d, kind, coeffs=coeffs)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.d:
            raise ConfigurationError(f"{self.kind} target expects dimension {self.d}, got {pts.shape[1]}")
        return np.asarray(self._fn(pts), dtype=np.float64)

    def __repr__(self) -> str:
        return f"Target(kind={self.kind}, d={self.d})"


def _normalized(coeffs: SparseCoeffs) -> SparseCoeffs:
    norm = sequence_norm(coeffs)
    if norm == 0.0:
        return coeffs
    return coeffs.scaled(1.0 / norm)


def constant_series(value: float, params: BesovParams) -> SparseCoeffs:
    """f ≡ value on [0,1]^d as level-0 coefficients (partition of unity)."""
    indices = active_index_set(0, params.beta, params.m)
    out = SparseCoeffs(params)
    out.set_level(0, indices, np.full(len(indices), float(value)))
    return out


# ----------------------------------------------------------------------
# Series generators
# ----------------------------------------------------------------------

def random_series_target(
    beta: Union[SmoothnessVec, Sequence[float]],
    p: float,
    q: float,
    m: int,
    K_deep: int,
    seed: int,
    decay: float = 1.0,
    cap: int = DEFAULT_INDEX_CAP,
) -> SparseCoeffs:
    """
    Random series in the unit ball of b^β_{p,q}.

    Level k gets Gaussian coefficients on the bases active on [0,1]^d,
    scaled so that its weighted contribution 2^{kβ̲−‖k‖/p}‖α_k‖_p equals
    2^{−decay·k}; the whole set is then normalized to sequence norm 1.

    Raises:
        IndexCapError: a level has more than `cap` active bases
    """
    params = BesovParams(beta=beta, p=p, q=q, m=m)
    rng = np.random.default_rng(seed)
    out = SparseCoeffs(params)
    for k in range(K_deep + 1):
        indices = active_index_set(k, params.beta, m, cap=cap)
        values = rng.standard_normal(len(indices))
        raw = SparseCoeffs(params)
        raw.set_level(k, indices, values)
        current = sequence_norm(raw)
        if current == 0.0:
            continue
        out.set_level(k, indices, values * (2.0 ** (-decay * k)) / current)
    logger.debug(f"Random series: {len(out)} coefficients over levels 0..{K_deep}")
    return _normalized(out)


def disjoint_lattice(k: int, beta: SmoothnessVec, m: int) -> np.ndarray:
    """
    Indices j with j_i ∈ {0, m+1, 2(m+1), ...} and j_i + m + 1 ≤ 2^{s_i}.

    The supports of distinct lattice bases have disjoint interiors and lie
    inside [0,1]^d. Returns an (n, d) array, possibly empty.
    """
    axes = []
    for s in level_scales(k, beta):
        top = 2**s - m - 1
        axes.append(np.arange(0, top + 1, m + 1, dtype=np.int64) if top >= 0 else np.zeros(0, dtype=np.int64))
    if any(len(a) == 0 for a in axes):
        return np.zeros((0, len(axes)), dtype=np.int64)
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def spike_target(
    beta: Union[SmoothnessVec, Sequence[float]],
    p: float,
    m: int,
    n_spikes: int,
    seed: int,
    spike_level: Optional[int] = None,
    background: float = 0.25,
    q: float = 1.0,
    background_level: int = 0,
) -> SparseCoeffs:
    """
    Isolated spikes at a fine level over a smooth coarse background.

    The spikes are n_spikes bases at distinct points of the disjoint
    lattice of spike_level, with random signs and equal magnitude. The
    background is a random series on background_level whose weighted
    contribution is `background` times that of the spikes. The result is
    normalized to sequence norm 1 with the given (small) p.

    Raises:
        ConfigurationError: fewer lattice points than spikes at this level
    """
    if n_spikes < 1:
        raise ConfigurationError(f"n_spikes must be at least 1, got {n_spikes}")
    params = BesovParams(beta=beta, p=p, q=q, m=m)
    level = DEFAULT_SPIKE_LEVEL if spike_level is None else spike_level
    lattice = disjoint_lattice(level, params.beta, m)
    if len(lattice) < n_spikes:
        raise ConfigurationError(
            f"only {len(lattice)} disjoint spike positions exist at level {level}; "
            "raise spike_level or lower n_spikes"
        )
    rng = np.random.default_rng(seed)
    chosen = lattice[np.sort(rng.choice(len(lattice), size=n_spikes, replace=False))]
    signs = rng.choice(np.array([-1.0, 1.0]), size=n_spikes)
    out = SparseCoeffs(params)
    out.set_level(level, chosen, signs)
    spike_weight = sequence_norm(out)

    if background > 0 and background_level != level:
        indices = active_index_set(background_level, params.beta, m)
        values = rng.standard_normal(len(indices))
        smooth = SparseCoeffs(params)
        smooth.set_level(background_level, indices, values)
        scale = background * spike_weight / sequence_norm(smooth)
        out.set_level(background_level, indices, values * scale)
    logger.debug(f"Spike target: {n_spikes} spikes at level {level}, background {background}")
    return _normalized(out)


def vg_lattice(k: int, beta: SmoothnessVec, m: int) -> np.ndarray:
    """Ĵ(k): the disjoint-support sub-lattice used by bump families."""
    lattice = disjoint_lattice(k, beta, m)
    if len(lattice) == 0:
        raise ConfigurationError(f"level {k} is too coarse for a bump with support inside [0,1]^d; raise the level")
    return lattice


def bump_energy(k: int, beta: SmoothnessVec, m: int) -> float:
    """‖M^d_{k,j}‖²_{L²} = Π_i 2^{−s_i}·N_{2m+1}(m+1) for a support inside the cube."""
    self_energy = float(eval_cardinal_bspline(2 * m + 1, m + 1.0))
    return float(np.prod([2.0 ** (-s) * self_energy for s in level_scales(k, beta)]))


def random_vg_family(
    k: int,
    beta: Union[SmoothnessVec, Sequence[float]],
    m: int,
    size: int,
    seed: int,
) -> List[np.ndarray]:
    """`size` seeded binary patterns over Ĵ(k)."""
    vec = beta if isinstance(beta, SmoothnessVec) else SmoothnessVec(beta=beta)
    n = len(vg_lattice(k, vec, m))
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 2, size=n).astype(np.int64) for _ in range(size)]


def vg_bump_target(
    k: int,
    beta: Union[SmoothnessVec, Sequence[float]],
    m: int,
    w: Optional[Sequence[int]] = None,
    seed: int = 0,
    delta: Optional[float] = None,
    p: float = 2.0,
    q: float = 2.0,
) -> SparseCoeffs:
    """
    Σ_{j ∈ Ĵ(k)} Δ w_j M^d_{k,j} with Δ = 2^{−kβ̲} unless given.

    A missing w is drawn from `seed`.

    Raises:
        ConfigurationError: w has the wrong length or is not binary
    """
    params = BesovParams(beta=beta, p=p, q=q, m=m)
    lattice = vg_lattice(k, params.beta, m)
    if w is None:
        pattern = np.random.default_rng(seed).integers(0, 2, size=len(lattice))
    else:
        pattern = np.asarray(w, dtype=np.int64)
        if pattern.shape != (len(lattice),):
            raise ConfigurationError(f"pattern has {pattern.size} entries but Ĵ({k}) has {len(lattice)}")
        if np.any((pattern != 0) & (pattern != 1)):
            raise ConfigurationError("bump patterns must be binary")
    step = 2.0 ** (-k * params.beta.beta_min) if delta is None else float(delta)
    out = SparseCoeffs(params)
    keep = pattern == 1
    if np.any(keep):
        out.set_level(k, lattice[keep], np.full(int(keep.sum()), step))
    return out


# ----------------------------------------------------------------------
# Compositions
# ----------------------------------------------------------------------

class AffineMap:
    """x ↦ A x + b from [0,1]^d into [0,1]^{d̃}, checked on the corners of the cube."""

    def __init__(self, A: np.ndarray, b: Optional[np.ndarray] = None, check: bool = True):
        self.A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        self.b = np.zeros(self.A.shape[0]) if b is None else np.asarray(b, dtype=np.float64).ravel()
        if len(self.b) != self.A.shape[0]:
            raise ConfigurationError(f"A has {self.A.shape[0]} rows but b has {len(self.b)} entries")
        if check:
            self.check_range()

    @property
    def input_dim(self) -> int:
        return self.A.shape[1]

    @property
    def output_dim(self) -> int:
        return self.A.shape[0]

    @property
    def magnitude(self) -> float:
        """max(‖A‖∞, ‖b‖∞) entrywise, the C of the affine budget."""
        return float(max(np.max(np.abs(self.A)), np.max(np.abs(self.b), initial=0.0)))

    def check_range(self) -> None:
        """
        Raise ConfigurationError naming a corner of [0,1]^d mapped outside [0,1]^{d̃}.

        Per output row the extreme corners are x_j = [A_ij < 0] (minimum) and
        x_j = [A_ij > 0] (maximum), so all 2^d corners are covered.
        """
        for i, row in enumerate(self.A):
            low_corner = (row < 0).astype(np.float64)
            high_corner = (row > 0).astype(np.float64)
            low = float(row @ low_corner + self.b[i])
            high = float(row @ high_corner + self.b[i])
            if low < -_RANGE_TOL:
                raise ConfigurationError(
                    f"affine map sends corner {low_corner.astype(int).tolist()} to {low:.6g} < 0 in coordinate {i}"
                )
            if high > 1.0 + _RANGE_TOL:
                raise ConfigurationError(
                    f"affine map sends corner {high_corner.astype(int).tolist()} to {high:.6g} > 1 in coordinate {i}"
                )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.atleast_2d(x) @ self.A.T + self.b, 0.0, 1.0)


def affine_target(
    inner: Union[SparseCoeffs, Target, Function],
    A: np.ndarray,
    b: Optional[np.ndarray] = None,
    d: Optional[int] = None,
) -> Target:
    """
    f(x) = h(A x + b) on [0,1]^d.

    Raises:
        ConfigurationError: dimension mismatch or a corner mapped outside the cube
    """
    amap = AffineMap(A, b)
    if d is not None and d != amap.input_dim:
        raise ConfigurationError(f"A has {amap.input_dim} columns but d = {d}")
    inner_dim = getattr(inner, "d", None)
    if inner_dim is not None and inner_dim != amap.output_dim:
        raise ConfigurationError(f"inner target has dimension {inner_dim} but A maps into {amap.output_dim}")
    params = getattr(inner, "params", None)

    def fn(x: np.ndarray) -> np.ndarray:
        return np.asarray(inner(amap(x)), dtype=np.float64)

    return Target(fn, amap.input_dim, "affine-comp", params=params, affine=amap, inner=inner)


class SeriesStage:
    """[0,1]^{d_in} → [0,1]^{outputs}: one series per output coordinate."""

    def __init__(self, series: Sequence[SparseCoeffs]):
        if not series:
            raise ConfigurationError("a series stage needs at least one output series")
        dims = {s.d for s in series}
        if len(dims) != 1:
            raise ConfigurationError("all output series of a stage must share the input dimension")
        self.series = list(series)

    @property
    def input_dim(self) -> int:
        return self.series[0].d

    @property
    def output_dim(self) -> int:
        return len(self.series)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.stack([s(x) for s in self.series], axis=1)


def unit_range_series(coeffs: SparseCoeffs) -> SparseCoeffs:
    """
    ½ + ½·h/B with B = Σ_k max_j |α_{k,j}|, a bound of sup |h| by the
    partition of unity; the result maps [0,1]^d into [0,1].
    """
    bound = sum(float(np.max(np.abs(coeffs.level_linear(k)[1]))) for k in coeffs.levels)
    scaled = coeffs.scaled(0.5 / bound) if bound > 0 else coeffs.copy()
    return scaled + constant_series(0.5, coeffs.params)


Stage = Union[AffineMap, SeriesStage]


def deep_target(stages: Sequence[Union[Stage, Sequence[SparseCoeffs], SparseCoeffs]]) -> Target:
    """
    clip ∘ h_H ∘ ... ∘ clip ∘ h_1 with every stage output clipped into [0,1].

    Stages are AffineMaps, SeriesStages, a list of per-coordinate series or
    a single series.

    Raises:
        ConfigurationError: stage dimensions do not chain
    """
    chain: List[Stage] = []
    for index, stage in enumerate(stages):
        if isinstance(stage, SparseCoeffs):
            stage = SeriesStage([stage])
        elif not isinstance(stage, (AffineMap, SeriesStage)):
            stage = SeriesStage(list(stage))
        if chain and chain[-1].output_dim != stage.input_dim:
            raise ConfigurationError(
                f"stage {index} expects {stage.input_dim} inputs but stage {index - 1} has {chain[-1].output_dim} outputs"
            )
        chain.append(stage)
    if not chain:
        raise ConfigurationError("deep_target needs at least one stage")

    def fn(x: np.ndarray) -> np.ndarray:
        h = x
        for stage in chain:
            h = np.clip(stage(h), 0.0, 1.0)
        return h[:, 0] if h.shape[1] == 1 else h

    last = chain[-1]
    params = last.series[0].params if isinstance(last, SeriesStage) else None
    target = Target(fn, chain[0].input_dim, "deep-comp", params=params)
    target.stages = chain
    return target


# ----------------------------------------------------------------------
# Dispatch
# ----------------------------------------------------------------------

def _inner_series(spec: Union[TargetSpec, StageSpec], kind: str, seed: int, cap: int) -> SparseCoeffs:
    if kind == "series":
        return random_series_target(spec.beta, spec.p, spec.q, spec.m, spec.K_deep, seed, decay=spec.decay, cap=cap)
    if kind == "spikes":
        return spike_target(
            spec.beta, spec.p, spec.m, spec.n_spikes, seed,
            spike_level=spec.spike_level, background=spec.background, q=spec.spike_q,
        )
    if kind == "vg-bumps":
        return vg_bump_target(spec.level, spec.beta, spec.m, w=spec.pattern, seed=seed, p=spec.p, q=spec.q)
    raise ConfigurationError(f"unknown series kind {kind!r}")


def _build_stage(stage: StageSpec, cap: int) -> Stage:
    if stage.kind == "affine":
        if stage.A is None:
            raise ConfigurationError("affine stages need A")
        return AffineMap(stage.A, stage.b)
    series = [
        unit_range_series(
            random_series_target(stage.beta, stage.p, stage.q, stage.m, stage.K_deep, stage.seed + i,
                                 decay=stage.decay, cap=cap)
        )
        for i in range(stage.outputs)
    ]
    return SeriesStage(series)


def build_target(spec: TargetSpec, cap: int = DEFAULT_INDEX_CAP) -> Target:
    """
    Build the Target described by a TargetSpec.

    Raises:
        ConfigurationError: invalid combinations (missing A, unreadable file,
            impossible spike placement, range violations)
    """
    if spec.kind == "constant":
        d = spec.d or spec.inner_dim
        beta = spec.beta if len(spec.beta) == d else [spec.beta[0]] * d
        params = BesovParams(beta=tuple(beta), p=spec.p, q=spec.q, m=spec.m)
        return Target.from_series(constant_series(spec.value, params), kind="constant")
    if spec.kind in ("series", "spikes", "vg-bumps"):
        coeffs = _inner_series(spec, spec.kind, spec.seed, cap)
        if spec.scale != 1.0:
            coeffs = coeffs.scaled(spec.scale)
        return Target.from_series(coeffs, kind=spec.kind)
    if spec.kind == "coeff-file":
        path = Path(spec.path)
        if not path.exists():
            raise ConfigurationError(f"coefficient file not found: {path}")
        coeffs = SparseCoeffs.load(path, p=spec.p, q=spec.q)
        return Target.from_series(coeffs.scaled(spec.scale) if spec.scale != 1.0 else coeffs, kind="coeff-file")
    if spec.kind == "affine-comp":
        inner = _inner_series(spec, spec.inner_kind, spec.seed, cap)
        if spec.scale != 1.0:
            inner = inner.scaled(spec.scale)
        d = spec.ambient_dim
        if spec.A is None:
            if d != spec.inner_dim:
                raise ConfigurationError("affine-comp targets with d != len(beta) need an explicit A")
            A = np.eye(d)
        else:
            A = np.asarray(spec.A, dtype=np.float64)
        target = affine_target(Target.from_series(inner), A, spec.b, d=d)
        target.params = inner.params
        return target
    if spec.kind == "deep-comp":
        return deep_target([_build_stage(stage, cap) for stage in spec.stages])
    raise ConfigurationError(f"unknown target kind {spec.kind!r}")
