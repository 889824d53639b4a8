"""
Adaptive sparse approximation of B-spline series.

Components:
  - make_plan: the budget schedule (K, K*, δ, ν, n_k, N) in exact arithmetic
  - adaptive_approximate: keep every coefficient up to level K and the n_k
    largest ones at each tail level K < k ≤ K*
  - approximation_error: L^r(Ω) error of an approximant on a quadrature rule
  - approximation_rate_study: (N, error) pairs over a K grid and their log-log slope
  - choose_level / basis_count / kept_budget: level and budget helpers shared
    with the estimators
  - nonadaptive_approx_exponent: the exponent a fixed-basis method is limited to

Ties among equal magnitudes are broken by lexicographic location j.
"""
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np

from ..analysis.besov import telescoped_coeffs
from ..bspline.core import DEFAULT_INDEX_CAP, index_cardinality, level_norm, level_scales
from ..errors import ConfigurationError, IndexCapError
from ..models.config import QuadratureSpec
from ..models.plan import AdaptivePlan
from ..models.report import (MIN_FIT_POINTS, STATUS_FITTED, STATUS_NOISE_FLOOR, STATUS_TOO_FEW,
                             RatePoint, RateReport)
from ..models.smoothness import BesovParams, SmoothnessVec, reciprocal
from ..models.sparse_coeffs import SparseCoeffs
from ..services.worker_pool import ordered_map
from .fitting import fit_loglog_slope, relative_deviation
from .quadrature import NormEstimate, evaluate_on, lr_norm, quadrature_nodes

logger = logging.getLogger(__name__)

# Errors at or below this are treated as exact reproduction
NOISE_FLOOR = 1e-10

APPROX_CLAIM = "adaptive approximation error decays as N^(-beta_tilde)"

Function = Callable[[np.ndarray], np.ndarray]


def _ceil_pow2(exponent: Fraction) -> int:
    """⌈2^e⌉ for rational e; exact when e is an integer."""
    if exponent.denominator == 1:
        e = int(exponent)
        return 2**e if e >= 0 else 1
    # 2^e is irrational here, so the float ceiling is exact away from overflow
    return math.ceil(2.0 ** float(exponent))


def make_plan(K: int, params: BesovParams) -> AdaptivePlan:
    """
    Budget schedule of the adaptive approximant at base level K.

    Raises:
        ConfigurationError: K < 0 or β̃ ≤ (1/p − 1/r)_+
    """
    if K < 0:
        raise ConfigurationError(f"base level K must be nonnegative, got {K}")
    beta = params.beta
    delta = params.delta_exact
    beta_tilde = beta.beta_tilde_exact
    if not beta_tilde > delta:
        raise ConfigurationError(
            f"inadmissible plan: beta_tilde={float(beta_tilde):.6g} must exceed "
            f"(1/p - 1/r)_+={float(delta):.6g}"
        )
    norm_K = level_norm(K, beta)
    N = 2**norm_K
    if delta == 0:
        return AdaptivePlan(K=K, delta=0.0, nu=math.inf, K_star=K, norm_K=norm_K, N=N, n_k={})

    nu = params.nu_exact
    K_star = math.ceil(K * (1 + 1 / nu))
    n_k: Dict[int, int] = {}
    for k in range(K + 1, K_star + 1):
        n_k[k] = _ceil_pow2(norm_K - nu * (level_norm(k, beta) - norm_K))
    plan = AdaptivePlan(K=K, delta=float(delta), nu=float(nu), K_star=K_star, norm_K=norm_K, N=N, n_k=n_k)
    logger.debug(f"Plan K={K}: K*={K_star}, nu={float(nu):.4g}, N={N}, tail budget {plan.tail_total()}")
    return plan


def choose_level(budget: float, beta: SmoothnessVec) -> int:
    """Largest K ≥ 0 with 2^{‖K‖} ≤ budget (0 when budget < 2^{‖1‖})."""
    K = 0
    while 2 ** level_norm(K + 1, beta) <= budget:
        K += 1
    return K


def active_count(k: int, beta: SmoothnessVec, m: int) -> int:
    """Number of level-k bases not vanishing on [0,1]^d."""
    count = 1
    for s in level_scales(k, beta):
        count *= 2**s + m
    return count


def basis_count(K: int, beta: SmoothnessVec, m: int) -> int:
    """Σ_{k ≤ K} active_count(k): the size of the non-adaptive basis at level K."""
    return sum(active_count(k, beta, m) for k in range(K + 1))


def kept_budget(plan: AdaptivePlan, beta: SmoothnessVec, m: int) -> int:
    """Upper bound on the entries an adaptive approximant with this plan keeps."""
    return basis_count(plan.K, beta, m) + plan.tail_total()


def nonadaptive_approx_exponent(beta: SmoothnessVec, p: float, r: float) -> float:
    """−(β̃ − (1/p − 1/min(2, r))_+), the best exponent with N fixed bases."""
    gap = max(reciprocal(p) - reciprocal(min(2.0, r)), Fraction(0))
    return -float(beta.beta_tilde_exact - gap)


def select_top(lin: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    """
    Positions of the n largest |values| among nonzeros, ties to the smaller
    linear index (lexicographic j). Returned in increasing linear-index order.
    """
    nonzero = np.flatnonzero(values != 0.0)
    if n <= 0 or len(nonzero) == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((lin[nonzero], -np.abs(values[nonzero])))
    chosen = nonzero[order[:n]]
    return np.sort(chosen)


def adaptive_approximate(coeffs: SparseCoeffs, plan: AdaptivePlan) -> SparseCoeffs:
    """
    Adaptive approximant f_N of a coefficient set.

    Keeps every entry with k ≤ K, the min(n_k, #nonzero) largest |α| at each
    K < k ≤ K*, and drops all entries with k > K*. Output entries are a subset
    of the input entries with unchanged values.
    """
    out = SparseCoeffs(coeffs.params)
    for k in coeffs.levels:
        if k > plan.K_star:
            break
        lin, values = coeffs.level_linear(k)
        budget = plan.budget(k)
        if budget is None:
            keep = np.arange(len(lin))
        else:
            keep = select_top(lin, values, budget)
        if len(keep):
            out.set_level_linear(k, lin[keep], values[keep])
    return out


def _difference_target(f_true, coeffs: SparseCoeffs) -> Optional[SparseCoeffs]:
    series = f_true if isinstance(f_true, SparseCoeffs) else getattr(f_true, "coeffs", None)
    if not isinstance(series, SparseCoeffs):
        return None
    if series.params.beta != coeffs.params.beta or series.params.m != coeffs.params.m:
        return None
    return series - coeffs


def approximation_error_estimate(
    f_true: Union[Function, SparseCoeffs],
    coeffs: SparseCoeffs,
    r: float,
    quad: QuadratureSpec,
) -> NormEstimate:
    """
    L^r(Ω) error of `coeffs` against f_true, with a standard error under
    Monte Carlo quadrature.

    When f_true is itself a series on the same basis (or a target carrying
    one) the error series is formed in coefficient space and evaluated once.
    """
    nodes = quadrature_nodes(coeffs.d, quad)
    monte_carlo = quad.resolved_kind(coeffs.d) == "mc"
    difference = _difference_target(f_true, coeffs)
    if difference is not None:
        values = evaluate_on(difference, nodes)
    else:
        values = evaluate_on(f_true, nodes) - evaluate_on(coeffs, nodes)
    return lr_norm(values, r, monte_carlo=monte_carlo)


def approximation_error(
    f_true: Union[Function, SparseCoeffs],
    coeffs: SparseCoeffs,
    r: float,
    quad: QuadratureSpec,
) -> float:
    """L^r(Ω) error estimate; r = ∞ gives the maximum over the nodes."""
    return approximation_error_estimate(f_true, coeffs, r, quad).value


def decompose_target(
    target: Union[Function, SparseCoeffs],
    params: BesovParams,
    max_level: int,
    decomposition: str = "auto",
    cap: int = DEFAULT_INDEX_CAP,
) -> SparseCoeffs:
    """
    Multilevel coefficients of a target.

    "generated" (or "auto" when available) uses the target's own series;
    otherwise the telescoped level projections up to max_level are computed.
    """
    series = target if isinstance(target, SparseCoeffs) else getattr(target, "coeffs", None)
    if decomposition in ("auto", "generated") and isinstance(series, SparseCoeffs):
        if series.params.beta != params.beta or series.params.m != params.m:
            raise ConfigurationError("the target series does not share the study's beta and m")
        if series.max_level < max_level:
            logger.debug(f"Target series stops at level {series.max_level}; deeper levels are zero")
        return series.with_params(params)
    if decomposition == "generated":
        raise ConfigurationError("decomposition='generated' needs a target with its own coefficients")
    for k in range(max_level + 1):
        size = index_cardinality(k, params.beta, params.m)
        if size > cap:
            raise IndexCapError(k, size, cap)
    logger.info(f"Computing telescoped decomposition up to level {max_level}")
    return telescoped_coeffs(target, max_level, params)


def approximation_rate_study(
    target: Union[Function, SparseCoeffs],
    K_list: Sequence[int],
    params: BesovParams,
    quad: QuadratureSpec,
    decomposition: str = "auto",
    jobs: Optional[int] = None,
    seed: int = 0,
    config_hash: str = "",
    cap: int = DEFAULT_INDEX_CAP,
) -> RateReport:
    """
    Fit the approximation exponent over a grid of base levels.

    Each K yields the point (N = ⌈2^{‖K‖}⌉, ‖f − f_N‖_{L^r}). The slope of
    log error against log N is compared with −β̃.

    Raises:
        ConfigurationError: fewer than two distinct budgets among the
            points above the noise floor
    """
    K_values = sorted(set(int(K) for K in K_list))
    if not K_values:
        raise ConfigurationError("K_list is empty")
    plans = [make_plan(K, params) for K in K_values]
    deepest = max(plan.K_star for plan in plans)
    coeffs = decompose_target(target, params, deepest, decomposition, cap=cap)

    def run(plan: AdaptivePlan) -> RatePoint:
        approx = adaptive_approximate(coeffs, plan)
        estimate = approximation_error_estimate(target, approx, params.r, quad)
        logger.debug(f"K={plan.K}: N={plan.N}, kept {len(approx)}, error {estimate.value:.4e}")
        return RatePoint(N=plan.N, error=estimate.value, stderr=estimate.stderr, kept=len(approx))

    points = ordered_map(run, plans, jobs=jobs, desc="approx-rate")
    points.sort(key=lambda pt: (pt.N, pt.kept))

    theory = -params.beta.beta_tilde
    report = RateReport(
        experiment="approx-rate",
        claim=APPROX_CLAIM,
        exponent_theory=theory,
        points=points,
        sidebar={"nonadaptive_exponent": nonadaptive_approx_exponent(params.beta, params.p, params.r)},
        plan=plans[-1].summary(),
        seed=seed,
        config_hash=config_hash,
    )
    if not any(plan.is_adaptive for plan in plans):
        report.notes.append("delta = 0: non-adaptive regime, every plan has an empty tail")
    return finalize_rate_report(report)


def finalize_rate_report(report: RateReport) -> RateReport:
    """
    Fit the slope of a report's points in place and set its status.

    Points at or below NOISE_FLOOR are left out of the fit. All points below
    the floor gives status "below-noise-floor"; fewer than MIN_FIT_POINTS
    usable points gives "too-few-points".
    """
    usable = [pt for pt in report.points if pt.error > NOISE_FLOOR]
    if not usable:
        logger.warning("Every error is below the noise floor; no slope is fitted")
        report.status = STATUS_NOISE_FLOOR
        report.reason = f"all errors <= {NOISE_FLOOR:g}"
        return report
    if len(usable) < len(report.points):
        report.notes.append(f"{len(report.points) - len(usable)} point(s) below the noise floor were not fitted")
    if len(usable) < MIN_FIT_POINTS:
        logger.warning(f"Only {len(usable)} usable points; at least {MIN_FIT_POINTS} are needed for an exponent")
        report.status = STATUS_TOO_FEW
        report.reason = f"{len(usable)} usable points, need {MIN_FIT_POINTS}"
        return report

    fit = fit_loglog_slope([pt.N for pt in usable], [pt.error for pt in usable])
    for pt, residual in zip(usable, fit.residuals):
        pt.residual = float(residual)
    report.status = STATUS_FITTED
    report.exponent_fit = fit.slope
    report.intercept_fit = fit.intercept
    report.residual_sse = fit.sse
    report.relative_deviation = relative_deviation(fit.slope, report.exponent_theory)
    logger.info(
        f"{report.experiment}: fitted exponent {fit.slope:.4f} vs theory {report.exponent_theory:.4f} "
        f"(relative deviation {report.relative_deviation:.1%})"
    )
    return report
