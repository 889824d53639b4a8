"""
Regression data, design samplers and the fitted-model interface.

Every estimator returns a FittedModel. The interface fixes one contract:
predictions are clipped into [−F, F], the truncation every risk bound in
this package assumes. Concrete models only implement the raw predictor.

Implementations:
  - SeriesModel (series.py): B-spline series on the ambient input or on
    the output of an affine input map
  - KernelRidgeModel (kernel_ridge.py): dual-form kernel ridge regression

Design distributions:
  - UniformSampler: P_X uniform on [0,1]^d
  - MixtureSampler: uniform background mixed with uniform boxes, with a
    bounded density ‖p_X‖∞ ≤ R

To add an estimator:
  1. Subclass FittedModel and implement predict_raw() and parameters()
  2. Add a fit_* function returning it
  3. Register the kind in estimators/study.py:fit_estimator
"""
import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from ..errors import ConfigurationError
from ..models.config import SamplerSpec

logger = logging.getLogger(__name__)

Function = Callable[[np.ndarray], np.ndarray]


class RegressionDataset:
    """
    Samples y_i = f(x_i) + ξ_i with ξ_i ~ N(0, σ²).

    Attributes:
        xs: (n, d) design points in [0,1]^d
        ys: (n,) responses
        sigma: noise level used at generation
        f_true: the generating target (None for data read from disk)
        seed: generation seed
    """

    def __init__(
        self,
        xs: np.ndarray,
        ys: np.ndarray,
        sigma: float = 0.0,
        f_true: Optional[Function] = None,
        seed: Optional[int] = None,
    ):
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        ys = np.asarray(ys, dtype=np.float64).ravel()
        if len(xs) != len(ys):
            raise ConfigurationError(f"{len(xs)} design points but {len(ys)} responses")
        if np.any(xs < 0.0) or np.any(xs > 1.0):
            raise ConfigurationError("design points must lie in [0,1]^d")
        if not np.all(np.isfinite(ys)):
            raise ConfigurationError("responses must be finite")
        self.xs = xs
        self.ys = ys
        self.sigma = sigma
        self.f_true = f_true
        self.seed = seed

    @property
    def n(self) -> int:
        return len(self.ys)

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    def subset(self, index: np.ndarray) -> "RegressionDataset":
        return RegressionDataset(self.xs[index], self.ys[index], self.sigma, self.f_true, self.seed)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write columns x1..xd, y with shortest round-trip decimals."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = ",".join([f"x{i + 1}" for i in range(self.d)] + ["y"])
        lines = [header]
        for row, y in zip(self.xs, self.ys):
            lines.append(",".join(repr(float(v)) for v in row) + "," + repr(float(y)))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], sigma: float = 0.0) -> "RegressionDataset":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"dataset file not found: {path}")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(table[:, :-1], table[:, -1], sigma=sigma)


# ----------------------------------------------------------------------
# Design samplers
# ----------------------------------------------------------------------

class UniformSampler:
    density_bound = 1.0

    def sample(self, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((n, d))


class MixtureSampler:
    """
    (1 − Σw) · U([0,1]^d) + Σ_i w_i · U(box_i).

    Each box is a pair [lo, hi] of d-vectors inside [0,1]^d.
    """

    def __init__(self, boxes: Sequence[Sequence[Sequence[float]]], weights: Sequence[float]):
        if len(boxes) != len(weights):
            raise ConfigurationError(f"{len(boxes)} boxes but {len(weights)} weights")
        self.weights = np.asarray(weights, dtype=np.float64)
        if np.any(self.weights < 0) or self.weights.sum() > 1.0:
            raise ConfigurationError("mixture weights must be nonnegative and sum to at most 1")
        self.boxes: List[np.ndarray] = []
        for box in boxes:
            lo, hi = (np.asarray(side, dtype=np.float64) for side in box)
            if np.any(lo < 0) or np.any(hi > 1) or np.any(hi <= lo):
                raise ConfigurationError(f"invalid mixture box {box}")
            self.boxes.append(np.stack([lo, hi]))

    @property
    def density_bound(self) -> float:
        """R with ‖p_X‖∞ ≤ R (boxes may overlap, so their densities add)."""
        volumes = [float(np.prod(box[1] - box[0])) for box in self.boxes]
        return float(1.0 - self.weights.sum() + sum(w / v for w, v in zip(self.weights, volumes)))

    def sample(self, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
        if any(box.shape[1] != d for box in self.boxes):
            raise ConfigurationError(f"mixture boxes do not match dimension {d}")
        probs = np.concatenate([[1.0 - self.weights.sum()], self.weights])
        component = rng.choice(len(probs), size=n, p=probs)
        u = rng.random((n, d))
        out = u.copy()
        for index, box in enumerate(self.boxes, start=1):
            rows = component == index
            out[rows] = box[0] + u[rows] * (box[1] - box[0])
        return out


Sampler = Union[UniformSampler, MixtureSampler]


def make_sampler(spec: Optional[SamplerSpec] = None) -> Sampler:
    if spec is None or spec.kind == "uniform":
        return UniformSampler()
    return MixtureSampler(spec.boxes, spec.weights)


def make_dataset(
    target: Function,
    n: int,
    d: int,
    sigma: float,
    seed: int,
    sampler: Optional[Sampler] = None,
    rng: Optional[np.random.Generator] = None,
) -> RegressionDataset:
    """
    Draw n design points from the sampler and add N(0, σ²) noise to target.

    The points are drawn before the noise from one generator, seeded by
    `seed` unless `rng` is given.
    """
    if n < 1:
        raise ConfigurationError(f"sample size must be positive, got {n}")
    target_dim = getattr(target, "d", d)
    if target_dim != d:
        raise ConfigurationError(f"target has dimension {target_dim} but data dimension is {d}")
    gen = rng if rng is not None else np.random.default_rng(seed)
    xs = (sampler or UniformSampler()).sample(n, d, gen)
    ys = np.asarray(target(xs), dtype=np.float64) + sigma * gen.standard_normal(n)
    return RegressionDataset(xs, ys, sigma=sigma, f_true=target, seed=seed)


# ----------------------------------------------------------------------
# Fitted models
# ----------------------------------------------------------------------

class FittedModel(ABC):
    """
    A trained regression function with output clipping at level F.

    Subclasses implement the unclipped predictor and a JSON description.
    """

    kind: str = "model"

    def __init__(self, clip_level: float):
        if not clip_level > 0:
            raise ConfigurationError(f"clip level must be positive, got {clip_level}")
        self.clip_level = float(clip_level)

    @abstractmethod
    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        """
        Unclipped predictions at x.

        Args:
            x: (n, d) points

        Returns:
            (n,) values
        """
        pass

    @abstractmethod
    def parameters(self) -> Dict[str, Any]:
        """JSON-safe fitted parameters (coefficients or dual weights)."""
        pass

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Predictions min(max(f̂(x), −F), F)."""
        raw = self.predict_raw(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        return np.clip(raw, -self.clip_level, self.clip_level)

    __call__ = predict

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "clip_level": self.clip_level, "parameters": self.parameters()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def default_clip_level(ys: np.ndarray, sigma: float) -> float:
    """max|y| + 3σ, or 1 for all-zero noiseless data."""
    level = float(np.max(np.abs(ys), initial=0.0)) + 3.0 * sigma
    return level if level > 0 else 1.0
