"""
besov-lab CLI - Main entry point for the command-line interface.

Commands:
    approx-rate - Adaptive approximation error against the budget N
    est-rate    - Estimation risk of one estimator against the sample size n
    compare     - Paired risks of several estimators on identical datasets
    net-synth   - Synthesize a ReLU B-spline unit (or a series approximant) and certify it
    rates       - Print the closed-form rate exponents for given parameters

Every experiment command reads a TOML config (--config) whose `kind` must
match the command; --seed, --jobs and --out override the file. Artifacts go
to --out (default ./runs/<command>-<hash>), Markdown summaries to stdout.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 numerical failure.
"""
import argparse
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..analysis.embedding import embedding_report
from ..approx.adaptive import approximation_rate_study
from ..compiler.report_compiler import ReportCompiler
from ..errors import BesovLabError, ConfigurationError
from ..estimators.base import make_sampler
from ..estimators.rates import DEFAULT_KAPPA, rate_affine, rate_deep, rate_isotropic, rate_linear_lower
from ..estimators.study import compare_estimators, estimation_rate_study, linear_sidebar, theory_exponent
from ..models.config import ExperimentConfig, load_config
from ..models.smoothness import BesovParams, SmoothnessVec
from ..models.sparse_coeffs import SparseCoeffs
from ..relu.budgets import budget_certificate, covering_number_bound, gadget_budget
from ..relu.gadgets import assemble_approximant, build_bspline_net, verify_approximant
from ..services.worker_pool import WorkerPool
from ..store.artifact_store import ArtifactStore, default_out_dir
from ..synth.targets import build_target

logger = logging.getLogger(__name__)


def _csv_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="besov_lab", description="Anisotropic Besov rate laboratory")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    subparsers = parser.add_subparsers(dest="command")

    # Experiment commands share the config and override flags
    for name, help_text in (
        ("approx-rate", "Fit the adaptive approximation exponent over a K grid"),
        ("est-rate", "Fit the estimation risk exponent over an n grid"),
        ("compare", "Compare estimators on identical datasets"),
        ("net-synth", "Synthesize and certify a ReLU B-spline network"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="Path to the experiment TOML file")
        sub.add_argument("--jobs", type=int, help="Worker count (does not change any output)")
        sub.add_argument("--out", help="Output directory for artifacts")
        sub.add_argument("--seed", type=int, help="Override the config's base seed")

    # Command: rates - pure formula calculator
    rates_parser = subparsers.add_parser("rates", help="Print rate exponents for given parameters")
    rates_parser.add_argument("--beta", type=_csv_floats, required=True, help="Smoothness vector, e.g. 1,4")
    rates_parser.add_argument("--p", type=float, default=2.0, help="Integrability p (inf allowed)")
    rates_parser.add_argument("--d", type=int, help="Ambient dimension (default: len(beta))")
    rates_parser.add_argument("--n", type=float, default=1000.0, help="Sample size for the rate values")
    rates_parser.add_argument("--stage", type=_csv_floats, action="append", default=[],
                              help="Smoothness of a deep-composition stage (repeat per stage)")
    rates_parser.add_argument("--kappa", type=float, default=DEFAULT_KAPPA, help="Affine-hull bound margin")
    rates_parser.add_argument("--out", help="Also write rates.json here")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    CLI entry point. Parses arguments, dispatches to the handler and maps
    library exceptions to exit codes.
    """
    logging.basicConfig(
        level=logging.INFO,
        format='%(levelname)s: %(message)s'
    )

    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    handlers = {
        "approx-rate": _handle_approx_rate,
        "est-rate": _handle_est_rate,
        "compare": _handle_compare,
        "net-synth": _handle_net_synth,
        "rates": _handle_rates,
    }
    handler = handlers.get(args.command)
    if handler is None:
        parser.print_help()
        return 1

    try:
        handler(args)
    except BesovLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return 0


# ----------------------------------------------------------------------
# Shared plumbing
# ----------------------------------------------------------------------

def _load(args) -> ExperimentConfig:
    config = load_config(args.config).with_overrides(seed=args.seed, jobs=args.jobs, out=args.out)
    if config.kind != args.command:
        raise ConfigurationError(f"{args.config} is a {config.kind!r} config, not {args.command!r}")
    WorkerPool.configure(config.jobs)
    return config


class _Run:
    """Output directory, timing and sidecar of one experiment command."""

    def __init__(self, command: str, config: ExperimentConfig):
        self.command = command
        self.config = config
        self.config_hash = config.config_hash()
        out = Path(config.out) if config.out else default_out_dir(command, self.config_hash)
        self.store = ArtifactStore(out)
        self.started = datetime.now(timezone.utc)
        self._t0 = time.perf_counter()
        logger.info(f"{command}: config {self.config_hash[:12]}, seed {config.seed}, jobs {config.jobs}")

    def finish(self) -> None:
        wall = time.perf_counter() - self._t0
        self.store.write_run_info(self.command, self.config_hash, self.started, wall, self.config.jobs)
        logger.info(f"Wrote {len(self.store.written)} artifacts to {self.store.out_dir} in {wall:.1f}s")


# ----------------------------------------------------------------------
# Handlers
# ----------------------------------------------------------------------

def _handle_approx_rate(args) -> None:
    """
    Approximation-rate study:
      1. Build the target and its Besov parameters (r and p from [approx])
      2. Run approximation_rate_study over K_list
      3. Write report.json / points.csv and print the summary
    """
    config = _load(args)
    run = _Run(args.command, config)
    spec = config.approx
    target = build_target(config.target, cap=config.index_cap)
    base = target.params if target.params is not None else config.target.besov_params()
    params = base.with_updates(r=spec.r, p=spec.p if spec.p is not None else base.p)
    if params.d != target.d:
        raise ConfigurationError(
            f"approximation studies need a target on [0,1]^{params.d}; this one has dimension {target.d}"
        )
    params.check_admissible()

    report = approximation_rate_study(
        target, spec.K_list, params, config.quadrature,
        decomposition=spec.decomposition, jobs=config.jobs, seed=config.seed,
        config_hash=run.config_hash, cap=config.index_cap,
    )
    _log_tolerance(report, spec.tolerance)
    run.store.write_report(report)
    run.finish()
    print(ReportCompiler().compile_rate_report(report))


def _target_sidebar(config: ExperimentConfig, d: int) -> Dict[str, float]:
    if config.target.kind == "deep-comp":
        return {}
    return linear_sidebar(config.target, d)


def _handle_est_rate(args) -> None:
    """
    Estimation-rate study of the first configured estimator.

    The theory exponent is −2β̃/(2β̃+1) of the target (or the deep rate for
    deep-comp targets); linear lower-bound exponents go to the sidebar.
    """
    config = _load(args)
    run = _Run(args.command, config)
    est = config.estimation
    if len(est.estimators) > 1:
        logger.warning(f"est-rate uses only the first of {len(est.estimators)} estimators; use compare for more")
    target = build_target(config.target, cap=config.index_cap)
    report = estimation_rate_study(
        target, est.estimators[0], est.n_list, est.sigma, est.seeds,
        px_sampler=make_sampler(est.sampler), n_test=est.n_test, base_seed=config.seed,
        exponent_theory=theory_exponent(config.target),
        sidebar=_target_sidebar(config, target.d),
        jobs=config.jobs, config_hash=run.config_hash,
    )
    _log_tolerance(report, est.tolerance)
    run.store.write_report(report)
    run.finish()
    print(ReportCompiler().compile_rate_report(report))


def _handle_compare(args) -> None:
    config = _load(args)
    run = _Run(args.command, config)
    est = config.estimation
    target = build_target(config.target, cap=config.index_cap)
    sidebar = _target_sidebar(config, target.d)
    sidebar["minimax_exponent"] = theory_exponent(config.target)
    table = compare_estimators(
        target, est.estimators, est.n_list, est.sigma, est.seeds,
        sampler=make_sampler(est.sampler), n_test=est.n_test, base_seed=config.seed,
        sidebar=sidebar, jobs=config.jobs, config_hash=run.config_hash,
    )
    run.store.write_comparison(table)
    run.finish()
    print(ReportCompiler().compile_comparison(table))


def _check_points(d: int, grid_points: Optional[int], count: int, seed: int) -> np.ndarray:
    """Tensor grid on [0,1]^d for d ≤ 2 when grid_points is set, else seeded uniform points."""
    if grid_points is not None and d <= 2:
        axis = np.linspace(0.0, 1.0, grid_points)
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)
    return np.random.default_rng(seed).random((count, d))


def _handle_net_synth(args) -> None:
    """
    Network synthesis with certificate.

    Without a coefficient file: build and verify the B-spline unit for
    (m, d, eps). With one: assemble the series approximant from units at
    eps_unit and measure it against the exact series.
    """
    config = _load(args)
    run = _Run(args.command, config)
    spec = config.net_synth
    summary: Dict[str, Any] = {"config_hash": run.config_hash, "seed": config.seed}

    if spec.coeff_file is None:
        unit = build_bspline_net(spec.m, spec.d, spec.eps, seed=config.seed)
        network = unit.network
        summary.update({
            "mode": "unit",
            "m": spec.m,
            "d": spec.d,
            "eps": spec.eps,
            "precision": unit.precision,
            "measured_error": unit.measured_error,
            "points_checked": unit.points_checked,
            "budget": gadget_budget(spec.d, spec.m, spec.eps).model_dump(),
        })
        delta = spec.eps
    else:
        coeffs = SparseCoeffs.load(spec.coeff_file, p=spec.p, r=spec.r)
        eps_unit = spec.eps_unit if spec.eps_unit is not None else spec.eps
        approximant = assemble_approximant(coeffs, eps_unit, seed=config.seed)
        points = _check_points(coeffs.d, spec.grid_points, spec.check_points, config.seed)
        measured = verify_approximant(approximant, coeffs, points)
        network = approximant.network
        summary.update({
            "mode": "series",
            "coeff_file": str(spec.coeff_file),
            "entries": approximant.entries,
            "eps_unit": eps_unit,
            "measured_error": measured,
            "error_bound": approximant.error_bound,
            "local_bound": approximant.local_bound,
            "points_checked": len(points),
        })
        if len(coeffs) >= 2:
            cert = budget_certificate(len(coeffs), coeffs.d, coeffs.params.m, coeffs.params)
            summary["budget"] = cert.model_dump()
        delta = min(eps_unit, 0.5)

    stats = network.stats
    summary["stats"] = stats.model_dump()
    summary["covering_log_bound"] = covering_number_bound(stats.L, stats.W, stats.S, stats.B, delta)
    summary["covering_delta"] = delta
    run.store.write_network(network)
    run.store.write_certificate(summary)
    run.finish()

    flat = {key: value for key, value in summary.items() if not isinstance(value, dict)}
    flat.update({f"stats.{key}": value for key, value in summary["stats"].items()})
    print(ReportCompiler().compile_key_values("net-synth", flat))


def _handle_rates(args) -> None:
    """Closed-form exponents for one parameter set (no config file)."""
    beta = SmoothnessVec(beta=tuple(args.beta))
    d = args.d if args.d is not None else beta.d
    if d < beta.d:
        raise ConfigurationError(f"ambient dimension {d} is smaller than len(beta) = {beta.d}")
    values: Dict[str, Any] = {
        "beta_tilde": beta.beta_tilde,
        "beta_min": beta.beta_min,
        "minimax_exponent": rate_affine(args.n, beta).exponent,
        "minimax_rate": rate_affine(args.n, beta).rate,
        "minimax_rate_log3": rate_affine(args.n, beta).rate_log3,
        "isotropic_exponent_at_beta_min": rate_isotropic(args.n, beta.beta_min, d).exponent,
        "approx_exponent": -beta.beta_tilde,
    }
    linear = rate_linear_lower(args.n, d, beta.d, beta.beta_min, args.p, beta_tilde=beta.beta_tilde, kappa=args.kappa)
    values["linear_nonadaptive_exponent"] = linear.nonadaptive_exponent
    if linear.affine_hull_exponent is not None:
        values["linear_affine_hull_exponent"] = linear.affine_hull_exponent

    embedding = embedding_report(BesovParams(beta=beta.beta, p=args.p))
    values["continuous"] = embedding.continuous
    if embedding.holder_smoothness is not None:
        values["holder_smoothness"] = embedding.holder_smoothness

    if args.stage:
        deep = rate_deep(args.n, [SmoothnessVec(beta=tuple(stage)) for stage in args.stage], args.p)
        values["deep_exponent"] = deep.exponent
        values["deep_beta_tilde_star_star"] = deep.beta_tilde_star_star
        values["deep_binding_stage"] = deep.binding_stage

    if args.out:
        store = ArtifactStore(args.out)
        store.write_rates({
            "inputs": {"beta": list(beta.beta), "p": args.p, "d": d, "n": args.n,
                       "stages": args.stage, "kappa": args.kappa},
            "values": values,
        })
    print(ReportCompiler().compile_key_values("rates", values))


def _log_tolerance(report, tolerance: float) -> None:
    if report.relative_deviation is None:
        return
    if report.within(tolerance):
        logger.info(f"Fitted exponent is within {tolerance:.0%} of theory")
    else:
        logger.warning(f"Fitted exponent deviates {report.relative_deviation:.1%} from theory (tolerance {tolerance:.0%})")


if __name__ == "__main__":
    sys.exit(main())
