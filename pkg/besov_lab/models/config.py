"""
Experiment configuration models and TOML loading.

An experiment is described by a TOML file validated into ExperimentConfig:

    kind = "approx-rate"        # approx-rate | est-rate | compare | net-synth
    seed = 7

    [target]                    # TargetSpec
    kind = "series"
    beta = [1.0, 4.0]
    p = 2.0
    q = "inf"                   # infinite exponents are written as "inf"
    m = 5

    [approx]                    # ApproxSpec (approx-rate)
    K_list = [2, 3, 4, 5, 6]

    [estimation]                # EstimationSpec (est-rate, compare)
    n_list = [256, 512, 1024]
    [[estimation.estimators]]   # EstimatorSpec, one table per estimator
    kind = "adaptive-series"

    [quadrature]                # QuadratureSpec
    [net_synth]                 # NetSynthSpec (net-synth)

CLI flags override the file (--seed, --jobs, --out). The config hash covers
every field except `jobs` and `out`, so reports do not depend on the worker
count or the output location.
"""
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer, field_validator, model_validator

from ..errors import ConfigurationError
from .smoothness import BesovParams, _parse_extended

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

# Fields left out of the config hash
_UNHASHED = {"jobs", "out"}


def _dump_extended(value: Optional[float]) -> Any:
    if value is not None and math.isinf(value):
        return "inf"
    return value


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QuadratureSpec(_Spec):
    """
    How L^r errors and risks are integrated over [0,1]^d.

    kind "auto" uses a midpoint tensor grid for d ≤ 2 and seeded Monte Carlo
    otherwise.
    """
    kind: Literal["auto", "grid", "mc"] = "auto"
    grid_points: int = Field(default=256, ge=2)
    n_mc: int = Field(default=100_000, ge=1000)
    seed: int = 42
    max_grid_dim: int = Field(default=2, ge=1, le=3)

    def resolved_kind(self, d: int) -> str:
        if self.kind == "auto":
            return "grid" if d <= self.max_grid_dim else "mc"
        if self.kind == "grid" and d > 3:
            raise ConfigurationError(f"tensor-grid quadrature supports d <= 3, got d={d}")
        return self.kind


class _SeriesFields(_Spec):
    beta: List[float] = Field(default_factory=lambda: [1.0])
    p: float = 2.0
    q: float = 2.0
    m: int = Field(default=2, ge=0)
    K_deep: int = Field(default=6, ge=0)
    decay: float = Field(default=1.0, ge=0.0)
    seed: int = 0

    @field_validator("p", "q", mode="before")
    @classmethod
    def _extended(cls, value: Any) -> Any:
        return _parse_extended(value)

    @field_serializer("p", "q")
    def _dump(self, value: float) -> Any:
        return _dump_extended(value)

    def besov_params(self, r: float = 2.0) -> BesovParams:
        return BesovParams(beta=tuple(self.beta), p=self.p, q=self.q, r=r, m=self.m)


class StageSpec(_SeriesFields):
    """
    One stage h_ℓ: [0,1]^{d_in} → [0,1]^{outputs} of a deep composition target.

    A "series" stage draws one random series per output coordinate (seeds
    seed, seed+1, ...) and rescales it into [0,1]; an "affine" stage is the
    map x ↦ A x + b.
    """
    kind: Literal["series", "affine"] = "series"
    outputs: int = Field(default=1, ge=1)
    A: Optional[List[List[float]]] = None
    b: Optional[List[float]] = None

    @property
    def input_dim(self) -> int:
        if self.kind == "affine" and self.A:
            return len(self.A[0])
        return len(self.beta)


class TargetSpec(_SeriesFields):
    """
    Ground-truth regression or approximation target.

    kinds:
        constant     f ≡ value
        series       random unit-ball series (beta, p, q, m, K_deep, decay, seed)
        spikes       isolated high-level bumps over a coarse background
        vg-bumps     disjoint-support sign pattern at `level`
        affine-comp  inner target of dimension len(beta) composed with x ↦ A x + b on [0,1]^d
        deep-comp    clipped composition of `stages`
        coeff-file   a besov-coeffs v1 file at `path`
    """
    kind: Literal["constant", "series", "spikes", "vg-bumps", "affine-comp", "deep-comp", "coeff-file"] = "series"
    value: float = 1.0
    scale: float = 1.0
    n_spikes: int = Field(default=4, ge=1)
    spike_level: Optional[int] = Field(default=None, ge=0)
    background: float = Field(default=0.25, ge=0.0)
    spike_q: float = 1.0
    level: int = Field(default=3, ge=0)
    pattern: Optional[List[int]] = None
    inner_kind: Literal["series", "spikes", "vg-bumps"] = "series"
    d: Optional[int] = Field(default=None, ge=1)
    A: Optional[List[List[float]]] = None
    b: Optional[List[float]] = None
    stages: List[StageSpec] = Field(default_factory=list)
    path: Optional[str] = None

    @property
    def inner_dim(self) -> int:
        return len(self.beta)

    @property
    def ambient_dim(self) -> int:
        if self.kind == "affine-comp":
            return self.d if self.d is not None else self.inner_dim
        if self.kind == "deep-comp" and self.stages:
            return self.stages[0].input_dim
        return self.inner_dim

    @model_validator(mode="after")
    def _check_kind(self) -> "TargetSpec":
        if self.kind == "deep-comp" and not self.stages:
            raise ValueError("deep-comp targets need at least one [[target.stages]] table")
        if self.kind == "coeff-file" and not self.path:
            raise ValueError("coeff-file targets need a path")
        return self


class SamplerSpec(_Spec):
    """
    Design distribution P_X on [0,1]^d.

    "mixture" mixes the uniform law (weight 1 − Σ weights) with uniform laws on
    the boxes [lo, hi]; its density is bounded by `MixtureSampler.density_bound`.
    """
    kind: Literal["uniform", "mixture"] = "uniform"
    boxes: List[List[List[float]]] = Field(default_factory=list)
    weights: List[float] = Field(default_factory=list)


class EstimatorSpec(_Spec):
    """
    One regression estimator.

    Series estimators use their own basis (beta, m; defaulting to the target's)
    and pick K from the rate budget n^{1/(2β̃+1)} when K = "auto". A
    non-adaptive estimator with K = "match" takes the largest K whose basis
    count does not exceed the adaptive budget at the same n.

    input_map "target-affine" feeds the series estimator A x + b of an
    affine-comp target instead of x.
    """
    kind: Literal["adaptive-series", "nonadaptive-series", "kernel-ridge"]
    name: Optional[str] = None
    K: Union[int, Literal["auto", "match"]] = "auto"
    beta: Optional[List[float]] = None
    m: Optional[int] = Field(default=None, ge=0)
    p: Optional[float] = None
    budget_scale: float = Field(default=1.0, gt=0)
    max_tail_level: Optional[int] = None
    ridge: Optional[float] = Field(default=None, ge=0.0)
    clip: Optional[float] = Field(default=None, gt=0)
    input_map: Literal["ambient", "target-affine"] = "ambient"
    kernel: Literal["gaussian", "matern"] = "gaussian"
    matern_nu: float = 1.5
    bandwidth: Optional[float] = Field(default=None, gt=0)
    lam: Optional[float] = Field(default=None, gt=0)
    bandwidths: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4, 0.8])
    lambdas: List[float] = Field(default_factory=lambda: [1e-4, 1e-3, 1e-2, 1e-1])
    holdout: float = Field(default=0.25, gt=0, lt=1)

    @field_validator("p", mode="before")
    @classmethod
    def _extended(cls, value: Any) -> Any:
        return _parse_extended(value)

    @field_serializer("p")
    def _dump(self, value: Optional[float]) -> Any:
        return _dump_extended(value)

    @property
    def label(self) -> str:
        return self.name or self.kind


class ApproxSpec(_Spec):
    """
    Approximation-rate study.

    decomposition "generated" uses the target's own coefficients,
    "telescoped" recomputes them by level projections, "auto" prefers the former.
    """
    K_list: List[int]
    r: float = 2.0
    p: Optional[float] = None
    decomposition: Literal["auto", "generated", "telescoped"] = "auto"
    tolerance: float = 0.25

    @field_validator("r", "p", mode="before")
    @classmethod
    def _extended(cls, value: Any) -> Any:
        return _parse_extended(value)

    @field_serializer("r", "p")
    def _dump(self, value: Optional[float]) -> Any:
        return _dump_extended(value)


class EstimationSpec(_Spec):
    """Estimation-rate study or comparison over a grid of sample sizes."""
    n_list: List[int]
    sigma: float = Field(default=0.1, ge=0.0)
    seeds: int = Field(default=5, ge=1)
    n_test: int = Field(default=10_000, ge=1000)
    estimators: List[EstimatorSpec]
    sampler: SamplerSpec = Field(default_factory=SamplerSpec)
    tolerance: float = 0.3


class NetSynthSpec(_Spec):
    """ReLU synthesis of one B-spline gadget (m, d, eps) or of a coefficient file."""
    m: int = Field(default=2, ge=1)
    d: int = Field(default=1, ge=1)
    eps: float = Field(default=1e-2, gt=0, lt=1)
    coeff_file: Optional[str] = None
    eps_unit: Optional[float] = Field(default=None, gt=0, lt=1)
    grid_points: Optional[int] = Field(default=None, ge=8)
    check_points: int = Field(default=10_000, ge=100)
    p: float = 2.0
    r: float = 2.0

    @field_validator("p", "r", mode="before")
    @classmethod
    def _extended(cls, value: Any) -> Any:
        return _parse_extended(value)

    @field_serializer("p", "r")
    def _dump(self, value: float) -> Any:
        return _dump_extended(value)


class ExperimentConfig(_Spec):
    kind: Literal["approx-rate", "est-rate", "compare", "net-synth"]
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    out: Optional[str] = None
    index_cap: int = Field(default=10**8, ge=1)
    target: TargetSpec = Field(default_factory=TargetSpec)
    approx: Optional[ApproxSpec] = None
    estimation: Optional[EstimationSpec] = None
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)
    net_synth: Optional[NetSynthSpec] = None

    @model_validator(mode="after")
    def _check_sections(self) -> "ExperimentConfig":
        if self.kind == "approx-rate" and self.approx is None:
            raise ValueError("approx-rate experiments need an [approx] table")
        if self.kind in ("est-rate", "compare") and self.estimation is None:
            raise ValueError(f"{self.kind} experiments need an [estimation] table")
        if self.kind == "compare" and len(self.estimation.estimators) < 2:
            raise ValueError("compare experiments need at least two estimators")
        if self.kind == "net-synth" and self.net_synth is None:
            raise ValueError("net-synth experiments need a [net_synth] table")
        return self

    def config_hash(self) -> str:
        payload = self.model_dump(mode="json", exclude=_UNHASHED)
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Apply non-None CLI overrides (seed, jobs, out)."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        if not changes:
            return self
        data = self.model_dump()
        data.update(changes)
        return ExperimentConfig(**data)


def _format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "; ".join(lines)


def parse_config(data: Dict[str, Any], source: str = "<config>") -> ExperimentConfig:
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        raise ConfigurationError(f"{source}: {_format_validation_error(e)}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate an experiment TOML file.

    Raises:
        ConfigurationError: missing file, TOML syntax error (with line and
            column) or a field that fails validation (with its dotted path)
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"{path}: {e}") from e
    config = parse_config(data, source=str(path))
    logger.debug(f"Loaded {config.kind} config from {path} (hash {config.config_hash()[:12]})")
    return config
