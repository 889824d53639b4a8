"""
Estimation-rate studies and paired estimator comparisons.

Both fan out over (sample size, replicate) tasks on the worker pool. Each
task draws its dataset from task_rng(base seed, n, replicate), so every
estimator in a comparison sees the same data and the results do not depend
on the number of workers. Test points for the risk come from a second
stream keyed the same way.

Series estimators resolve their basis and level per task:
  - beta / m / p default to the target's
  - K = "auto": choose_level(budget_scale · n^{1/(2β̃+1)})
  - K = "match" (non-adaptive): the largest K whose basis count fits in the
    reference adaptive estimator's kept budget at the same n
  - input_map = "target-affine": evaluate the basis at A x + b of an
    affine-composition target
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..approx.adaptive import basis_count, choose_level, finalize_rate_report, kept_budget, make_plan
from ..errors import ConfigurationError
from ..models.config import EstimatorSpec, TargetSpec
from ..models.plan import AdaptivePlan
from ..models.report import ComparisonRow, ComparisonTable, RatePoint, RateReport
from ..models.smoothness import BesovParams, SmoothnessVec
from ..services.worker_pool import ordered_map, task_rng, task_seed
from ..synth.targets import AffineMap, Target
from .base import FittedModel, Sampler, default_clip_level, make_dataset
from .kernel_ridge import fit_kernel_ridge, tune_kernel_ridge
from .rates import rate_affine, rate_deep, rate_linear_lower
from .risk import empirical_risk
from .series import fit_adaptive_series, fit_nonadaptive_series

logger = logging.getLogger(__name__)

EST_CLAIM = "least-squares risk decays as n^(-2 beta_tilde/(2 beta_tilde + 1))"
COMPARE_CLAIM = "adaptive estimators beat linear ones on spatially inhomogeneous and low-dimensional structure"

MIN_SAMPLE_SIZES = 4
MIN_SEEDS = 3

# Largest K tried when matching a non-adaptive basis to an adaptive budget
_MAX_MATCH_LEVEL = 64

# Stream keys for the per-task generators
_DATA_STREAM = 0
_TEST_STREAM = 1
_TUNE_STREAM = 2


# ----------------------------------------------------------------------
# Theory exponents
# ----------------------------------------------------------------------

def theory_exponent(spec: TargetSpec) -> float:
    """Exponent the estimation risk of this target should decay with."""
    if spec.kind == "deep-comp":
        series_stages = [stage for stage in spec.stages if stage.kind == "series"]
        if not series_stages:
            raise ConfigurationError("deep-comp targets need at least one series stage for a rate")
        betas = [SmoothnessVec(beta=tuple(stage.beta)) for stage in series_stages]
        return rate_deep(2, betas, min(stage.p for stage in series_stages)).exponent
    return rate_affine(2, SmoothnessVec(beta=tuple(spec.beta))).exponent


def linear_sidebar(spec: TargetSpec, d: int) -> Dict[str, float]:
    """Linear-estimator lower-bound exponents printed next to a rate."""
    beta = SmoothnessVec(beta=tuple(spec.beta))
    bounds = rate_linear_lower(2, d, beta.d, beta.beta_min, spec.p, beta_tilde=beta.beta_tilde)
    out = {"beta_tilde": beta.beta_tilde, "linear_nonadaptive_exponent": bounds.nonadaptive_exponent}
    if bounds.affine_hull_exponent is not None:
        out["linear_affine_hull_exponent"] = bounds.affine_hull_exponent
    return out


# ----------------------------------------------------------------------
# Estimator resolution
# ----------------------------------------------------------------------

def _input_map(spec: EstimatorSpec, target: Target) -> Optional[AffineMap]:
    if spec.input_map == "ambient":
        return None
    if target.affine is None:
        raise ConfigurationError(f"estimator {spec.label!r} uses input_map='target-affine' but the target has no affine map")
    return target.affine


def series_params(spec: EstimatorSpec, target: Target) -> BesovParams:
    """Basis parameters of a series estimator (r = 2 for the L² risk)."""
    base = target.params
    amap = _input_map(spec, target)
    dim = amap.output_dim if amap is not None else target.d
    if spec.beta is not None:
        beta = tuple(spec.beta)
    elif base is not None and base.d == dim:
        beta = base.beta.beta
    else:
        raise ConfigurationError(
            f"estimator {spec.label!r} needs an explicit beta for its {dim}-dimensional input"
        )
    m = spec.m if spec.m is not None else (base.m if base is not None else 2)
    p = spec.p if spec.p is not None else (base.p if base is not None else 2.0)
    q = base.q if base is not None else 2.0
    params = BesovParams(beta=beta, p=p, q=q, r=2.0, m=m)
    if params.d != dim:
        raise ConfigurationError(f"estimator {spec.label!r} has beta of length {params.d} for a {dim}-dimensional input")
    return params


def auto_level(n: int, params: BesovParams, budget_scale: float = 1.0) -> int:
    """choose_level at the rate budget n^{1/(2β̃+1)}."""
    budget = budget_scale * n ** (1.0 / (2.0 * params.beta.beta_tilde + 1.0))
    return choose_level(budget, params.beta)


def _adaptive_plan(spec: EstimatorSpec, n: int, params: BesovParams) -> AdaptivePlan:
    K = auto_level(n, params, spec.budget_scale) if spec.K in ("auto", "match") else int(spec.K)
    return make_plan(K, params)


def matched_level(budget: int, params: BesovParams) -> int:
    """Largest K with basis_count(K) ≤ budget (0 when even level 0 exceeds it)."""
    K = 0
    while K < _MAX_MATCH_LEVEL and basis_count(K + 1, params.beta, params.m) <= budget:
        K += 1
    return K


def resolve_level(
    spec: EstimatorSpec,
    n: int,
    params: BesovParams,
    reference: Optional[Tuple[EstimatorSpec, BesovParams]] = None,
) -> int:
    if isinstance(spec.K, int):
        return spec.K
    if spec.K == "auto" or spec.kind == "adaptive-series":
        return auto_level(n, params, spec.budget_scale)
    ref_spec, ref_params = reference if reference is not None else (spec, params)
    plan = _adaptive_plan(ref_spec, n, ref_params)
    return matched_level(kept_budget(plan, ref_params.beta, ref_params.m), params)


def fit_estimator(
    spec: EstimatorSpec,
    data,
    target: Target,
    tune_seed: int,
    reference: Optional[Tuple[EstimatorSpec, BesovParams]] = None,
) -> FittedModel:
    """Fit one configured estimator on a dataset."""
    F = spec.clip if spec.clip is not None else default_clip_level(data.ys, data.sigma)
    if spec.kind == "kernel-ridge":
        if spec.bandwidth is not None and spec.lam is not None:
            return fit_kernel_ridge(data, spec.kernel, spec.bandwidth, spec.lam, F, spec.matern_nu)
        bandwidths = [spec.bandwidth] if spec.bandwidth is not None else spec.bandwidths
        lambdas = [spec.lam] if spec.lam is not None else spec.lambdas
        return tune_kernel_ridge(data, spec.kernel, bandwidths, lambdas, F, spec.holdout, tune_seed, spec.matern_nu)

    params = series_params(spec, target)
    amap = _input_map(spec, target)
    K = resolve_level(spec, data.n, params, reference)
    if spec.kind == "adaptive-series":
        plan = make_plan(K, params)
        return fit_adaptive_series(data, plan, F, spec.ridge, params=params,
                                   max_tail_level=spec.max_tail_level, input_map=amap)
    return fit_nonadaptive_series(data, K, F, spec.ridge, params=params, input_map=amap)


def _model_size(model: FittedModel) -> Optional[int]:
    coeffs = getattr(model, "coeffs", None)
    return len(coeffs) if coeffs is not None else None


def _reference(specs: Sequence[EstimatorSpec], target: Target) -> Optional[Tuple[EstimatorSpec, BesovParams]]:
    for spec in specs:
        if spec.kind == "adaptive-series":
            return spec, series_params(spec, target)
    return None


def _warn_inadmissible(target: Target) -> None:
    if target.params is None:
        return
    for problem in target.params.admissibility_problems():
        logger.warning(f"Target parameters: {problem}")


def _check_grid(n_list: Sequence[int], seeds: int) -> List[int]:
    ns = sorted(set(int(n) for n in n_list))
    if len(ns) < MIN_SAMPLE_SIZES:
        raise ConfigurationError(f"estimation studies need at least {MIN_SAMPLE_SIZES} sample sizes, got {len(ns)}")
    if seeds < MIN_SEEDS:
        raise ConfigurationError(f"estimation studies need at least {MIN_SEEDS} seeds, got {seeds}")
    return ns


# ----------------------------------------------------------------------
# Studies
# ----------------------------------------------------------------------

def _run_replicate(
    target: Target,
    specs: Sequence[EstimatorSpec],
    n: int,
    replicate: int,
    sigma: float,
    sampler: Optional[Sampler],
    n_test: int,
    base_seed: int,
    reference: Optional[Tuple[EstimatorSpec, BesovParams]],
) -> List[Tuple[float, Optional[int]]]:
    data = make_dataset(target, n, target.d, sigma, seed=base_seed, sampler=sampler,
                        rng=task_rng(base_seed, n, replicate, _DATA_STREAM))
    test_seed = task_seed(base_seed, n, replicate, _TEST_STREAM)
    tune_seed = task_seed(base_seed, n, replicate, _TUNE_STREAM)
    out = []
    for spec in specs:
        model = fit_estimator(spec, data, target, tune_seed, reference)
        risk = empirical_risk(model, target, sampler, n_test, test_seed, d=target.d)
        out.append((risk.value, _model_size(model)))
    return out


def _risk_grid(
    target: Target,
    specs: Sequence[EstimatorSpec],
    ns: Sequence[int],
    sigma: float,
    seeds: int,
    sampler: Optional[Sampler],
    n_test: int,
    base_seed: int,
    jobs: Optional[int],
    desc: str,
) -> Dict[Tuple[int, int], List[Tuple[float, Optional[int]]]]:
    reference = _reference(specs, target)
    tasks = [(n, rep) for n in ns for rep in range(seeds)]

    def run(task: Tuple[int, int]) -> List[Tuple[float, Optional[int]]]:
        n, rep = task
        return _run_replicate(target, specs, n, rep, sigma, sampler, n_test, base_seed, reference)

    results = ordered_map(run, tasks, jobs=jobs, desc=desc)
    return dict(zip(tasks, results))


def _mean_and_stderr(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(arr))
    stderr = float(np.std(arr, ddof=1)) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
    return mean, stderr


def estimation_rate_study(
    target: Target,
    estimator_spec: EstimatorSpec,
    n_list: Sequence[int],
    sigma: float,
    seeds: int,
    px_sampler: Optional[Sampler] = None,
    n_test: int = 10_000,
    base_seed: int = 0,
    exponent_theory: Optional[float] = None,
    sidebar: Optional[Dict[str, float]] = None,
    jobs: Optional[int] = None,
    config_hash: str = "",
) -> RateReport:
    """
    Mean risk over seeds at each n and the log-log slope against n.

    exponent_theory defaults to −2β̃/(2β̃+1) of the target's parameters.

    Raises:
        ConfigurationError: fewer than 4 sample sizes or 3 seeds, or a
            degenerate fit
    """
    ns = _check_grid(n_list, seeds)
    _warn_inadmissible(target)
    if exponent_theory is None:
        if target.params is None:
            raise ConfigurationError("exponent_theory is required for targets without Besov parameters")
        exponent_theory = rate_affine(2, target.params.beta).exponent
    logger.info(f"Estimation study: {estimator_spec.label} on {target!r}, n in {ns}, {seeds} seeds")
    grid = _risk_grid(target, [estimator_spec], ns, sigma, seeds, px_sampler, n_test, base_seed, jobs, "est-rate")

    points = []
    for n in ns:
        risks = [grid[(n, rep)][0][0] for rep in range(seeds)]
        sizes = [grid[(n, rep)][0][1] for rep in range(seeds)]
        mean, stderr = _mean_and_stderr(risks)
        kept = max(sizes) if all(s is not None for s in sizes) else None
        points.append(RatePoint(N=n, error=mean, stderr=stderr, kept=kept))
    report = RateReport(
        experiment="est-rate",
        claim=EST_CLAIM,
        exponent_theory=exponent_theory,
        points=points,
        sidebar=dict(sidebar or {}),
        seed=base_seed,
        config_hash=config_hash,
    )
    report.notes.append(f"estimator: {estimator_spec.label}")
    if estimator_spec.kind == "adaptive-series":
        report.notes.append("adaptive series least squares stands in for sparse-network least squares")
    return finalize_rate_report(report)


def _unique_labels(specs: Sequence[EstimatorSpec]) -> List[str]:
    labels: List[str] = []
    for spec in specs:
        label = spec.label
        if label in labels:
            count = sum(1 for existing in labels if existing == label or existing.startswith(label + "#"))
            label = f"{label}#{count + 1}"
        labels.append(label)
    return labels


def compare_estimators(
    target: Target,
    specs: Sequence[EstimatorSpec],
    n_list: Sequence[int],
    sigma: float,
    seeds: int,
    sampler: Optional[Sampler] = None,
    n_test: int = 10_000,
    base_seed: int = 0,
    sidebar: Optional[Dict[str, float]] = None,
    jobs: Optional[int] = None,
    config_hash: str = "",
) -> ComparisonTable:
    """
    Per-n risks of several estimators fitted on identical datasets.

    Raises:
        ConfigurationError: fewer than two estimators
    """
    if len(specs) < 2:
        raise ConfigurationError("a comparison needs at least two estimators")
    ns = sorted(set(int(n) for n in n_list))
    _warn_inadmissible(target)
    labels = _unique_labels(specs)
    logger.info(f"Comparing {', '.join(labels)} on {target!r}, n in {ns}, {seeds} seeds")
    grid = _risk_grid(target, specs, ns, sigma, seeds, sampler, n_test, base_seed, jobs, "compare")

    rows = []
    for n in ns:
        per_seed = {label: [grid[(n, rep)][i][0] for rep in range(seeds)] for i, label in enumerate(labels)}
        stats = {label: _mean_and_stderr(values) for label, values in per_seed.items()}
        rows.append(ComparisonRow(
            n=n,
            mean={label: s[0] for label, s in stats.items()},
            stderr={label: s[1] for label, s in stats.items()},
            per_seed=per_seed,
        ))
    return ComparisonTable(
        claim=COMPARE_CLAIM,
        estimators=labels,
        rows=rows,
        sidebar=dict(sidebar or {}),
        seeds=list(range(seeds)),
        config_hash=config_hash,
    )
