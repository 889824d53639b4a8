"""
Sparse B-spline series coefficients.

A SparseCoeffs holds a finite map (k, j) -> α_{k,j} representing the series

    f(x) = Σ_k Σ_{j ∈ J(k)} α_{k,j} M^d_{k,j}(x)

together with the BesovParams it belongs to. Each populated level is stored
as a block of sorted linear indices over J(k) (row-major with offset m, which
is the same as lexicographic order on j) and matching float values. Point
lookups are vectorized with np.searchsorted.

The text format `besov-coeffs v1` is line oriented:

    besov-coeffs v1; d=<d>; m=<m>; beta=<csv>
    <k> <j1> ... <jd> <alpha>

with alpha printed as the shortest round-trip decimal (Python repr), so a
dump followed by a load reproduces every coefficient bit for bit.

These objects are used by:
  - analysis: sequence norm and the telescoped quasi-projection
  - approx: adaptive selection and rate studies
  - relu: network assembly from a series
  - estimators: fitted series models
  - synth: every coefficient-based target
"""
import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..bspline.core import eval_series, level_shape, ravel_locations, unravel_locations
from ..errors import ConfigurationError
from .smoothness import BesovParams, LevelLocation

logger = logging.getLogger(__name__)

FORMAT_HEADER = "besov-coeffs v1"


class _LevelBlock:
    """Sorted linear indices and values for one level."""

    __slots__ = ("lin", "values")

    def __init__(self, lin: np.ndarray, values: np.ndarray):
        self.lin = lin
        self.values = values


class SparseCoeffs:
    """
    Level-indexed sparse coefficient map of a B-spline series.

    Attributes:
        params: Besov parameters (β, m and the p, q used by the sequence norm)

    Entries outside J(k) are rejected on insertion. Zero values may be
    stored; prune() drops them.
    """

    def __init__(self, params: BesovParams):
        self.params = params
        self._blocks: Dict[int, _LevelBlock] = {}

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_entries(
        cls,
        params: BesovParams,
        entries: Dict[Tuple[int, Tuple[int, ...]], float],
    ) -> "SparseCoeffs":
        """Build from a {(k, j): alpha} mapping."""
        coeffs = cls(params)
        by_level: Dict[int, List[Tuple[Tuple[int, ...], float]]] = {}
        for (k, j), alpha in entries.items():
            by_level.setdefault(int(k), []).append((tuple(int(v) for v in j), float(alpha)))
        for k, items in by_level.items():
            indices = np.array([j for j, _ in items], dtype=np.int64).reshape(len(items), params.d)
            values = np.array([a for _, a in items], dtype=np.float64)
            coeffs.set_level(k, indices, values)
        return coeffs

    def set_level(self, k: int, indices: np.ndarray, values: np.ndarray) -> None:
        """
        Replace level k with the given (n, d) indices and (n,) values.

        Raises:
            ConfigurationError: on a dimension mismatch, a location outside
                J(k) or a repeated location
        """
        d = self.params.d
        m = self.params.m
        idx = np.asarray(indices, dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64).ravel()
        if idx.size == 0:
            self._blocks.pop(k, None)
            return
        if idx.ndim != 2 or idx.shape[1] != d:
            raise ConfigurationError(f"level {k}: expected indices of shape (n, {d}), got {idx.shape}")
        if len(idx) != len(vals):
            raise ConfigurationError(f"level {k}: {len(idx)} locations but {len(vals)} values")
        shape = level_shape(k, self.params.beta, m)
        upper = np.array(shape, dtype=np.int64) - m - 1
        bad = np.any((idx < -m) | (idx > upper), axis=1)
        if np.any(bad):
            first = tuple(int(v) for v in idx[np.argmax(bad)])
            raise ConfigurationError(f"location j={first} is outside J({k})")
        lin = ravel_locations(idx, shape, m)
        order = np.argsort(lin, kind="stable")
        lin = lin[order]
        if len(lin) > 1 and np.any(lin[1:] == lin[:-1]):
            raise ConfigurationError(f"level {k} contains a repeated location")
        self._blocks[k] = _LevelBlock(lin, vals[order].copy())

    def set_level_linear(self, k: int, lin: np.ndarray, values: np.ndarray) -> None:
        """Replace level k from linear indices over J(k); see ravel_locations."""
        shape = level_shape(k, self.params.beta, self.params.m)
        self.set_level(k, unravel_locations(np.asarray(lin, dtype=np.int64), shape, self.params.m), values)

    def copy(self) -> "SparseCoeffs":
        out = SparseCoeffs(self.params)
        for k, block in self._blocks.items():
            out._blocks[k] = _LevelBlock(block.lin.copy(), block.values.copy())
        return out

    def with_params(self, params: BesovParams) -> "SparseCoeffs":
        """Same entries under different (p, q, r); β and m must agree."""
        if params.beta != self.params.beta or params.m != self.params.m:
            raise ConfigurationError("with_params can only change p, q and r")
        out = self.copy()
        out.params = params
        return out

    # ------------------------------------------------------------------
    # Access
    # ------------------------------------------------------------------

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def levels(self) -> List[int]:
        return sorted(self._blocks)

    @property
    def max_level(self) -> int:
        return max(self._blocks) if self._blocks else -1

    def __len__(self) -> int:
        return sum(len(b.lin) for b in self._blocks.values())

    def __bool__(self) -> bool:
        return len(self) > 0

    def level_linear(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """(sorted linear indices, values) of level k; empty arrays if absent."""
        block = self._blocks.get(k)
        if block is None:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        return block.lin, block.values

    def level(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """((n, d) locations, values) of level k in lexicographic order."""
        lin, values = self.level_linear(k)
        shape = level_shape(k, self.params.beta, self.params.m)
        return unravel_locations(lin, shape, self.params.m), values

    def items(self) -> Iterator[Tuple[LevelLocation, float]]:
        for k in self.levels:
            indices, values = self.level(k)
            for j, alpha in zip(indices, values):
                yield LevelLocation(k, tuple(int(v) for v in j)), float(alpha)

    def get(self, k: int, j: Tuple[int, ...], default: float = 0.0) -> float:
        block = self._blocks.get(k)
        if block is None:
            return default
        shape = level_shape(k, self.params.beta, self.params.m)
        try:
            lin = int(ravel_locations(np.array([j]), shape, self.params.m)[0])
        except ValueError:
            return default
        pos = int(np.searchsorted(block.lin, lin))
        if pos < len(block.lin) and block.lin[pos] == lin:
            return float(block.values[pos])
        return default

    def lookup(self, k: int, lin: np.ndarray) -> np.ndarray:
        """Vectorized α_{k, lin}, zero where the location is not stored."""
        block = self._blocks.get(k)
        lin = np.asarray(lin, dtype=np.int64)
        if block is None or len(block.lin) == 0:
            return np.zeros(len(lin))
        pos = np.searchsorted(block.lin, lin)
        pos = np.minimum(pos, len(block.lin) - 1)
        hit = block.lin[pos] == lin
        return np.where(hit, block.values[pos], 0.0)

    def all_values(self) -> np.ndarray:
        if not self._blocks:
            return np.zeros(0)
        return np.concatenate([self._blocks[k].values for k in self.levels])

    def abs_sum(self) -> float:
        return float(np.sum(np.abs(self.all_values())))

    def max_abs(self) -> float:
        values = self.all_values()
        return float(np.max(np.abs(values))) if len(values) else 0.0

    # ------------------------------------------------------------------
    # Algebra
    # ------------------------------------------------------------------

    def prune(self, tol: float = 0.0) -> "SparseCoeffs":
        """Copy without entries of magnitude ≤ tol."""
        out = SparseCoeffs(self.params)
        for k, block in self._blocks.items():
            keep = np.abs(block.values) > tol
            if np.any(keep):
                out._blocks[k] = _LevelBlock(block.lin[keep], block.values[keep])
        return out

    def restrict(self, max_level: int) -> "SparseCoeffs":
        """Copy holding only levels k ≤ max_level."""
        out = SparseCoeffs(self.params)
        for k, block in self._blocks.items():
            if k <= max_level:
                out._blocks[k] = _LevelBlock(block.lin.copy(), block.values.copy())
        return out

    def scaled(self, factor: float) -> "SparseCoeffs":
        out = self.copy()
        for block in out._blocks.values():
            block.values *= factor
        return out

    def _combine(self, other: "SparseCoeffs", sign: float) -> "SparseCoeffs":
        if other.params.beta != self.params.beta or other.params.m != self.params.m:
            raise ConfigurationError("cannot combine coefficient sets with different beta or m")
        out = SparseCoeffs(self.params)
        for k in sorted(set(self._blocks) | set(other._blocks)):
            lin_a, val_a = self.level_linear(k)
            lin_b, val_b = other.level_linear(k)
            lin = np.union1d(lin_a, lin_b)
            values = self.lookup(k, lin) + sign * other.lookup(k, lin)
            out._blocks[k] = _LevelBlock(lin, values)
        return out

    def __add__(self, other: "SparseCoeffs") -> "SparseCoeffs":
        return self._combine(other, 1.0)

    def __sub__(self, other: "SparseCoeffs") -> "SparseCoeffs":
        return self._combine(other, -1.0)

    def equals(self, other: "SparseCoeffs") -> bool:
        """Exact equality of stored entries (zeros included) and of β, m."""
        if other.params.beta != self.params.beta or other.params.m != self.params.m:
            return False
        if self.levels != other.levels:
            return False
        for k in self.levels:
            lin_a, val_a = self.level_linear(k)
            lin_b, val_b = other.level_linear(k)
            if not (np.array_equal(lin_a, lin_b) and np.array_equal(val_a, val_b)):
                return False
        return True

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the series at points of shape (n, d) (or one point of shape (d,))."""
        return eval_series(self, x)

    def __repr__(self) -> str:
        return f"SparseCoeffs(d={self.d}, m={self.params.m}, levels={self.levels}, entries={len(self)})"

    # ------------------------------------------------------------------
    # besov-coeffs v1 text format
    # ------------------------------------------------------------------

    def dumps(self) -> str:
        beta = ",".join(repr(float(b)) for b in self.params.beta.beta)
        lines = [f"{FORMAT_HEADER}; d={self.d}; m={self.params.m}; beta={beta}"]
        for k in self.levels:
            indices, values = self.level(k)
            for j, alpha in zip(indices, values):
                coords = " ".join(str(int(v)) for v in j)
                lines.append(f"{k} {coords} {float(alpha)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(
        cls,
        text: str,
        p: Union[float, str] = 2.0,
        q: Union[float, str] = 2.0,
        r: Union[float, str] = 2.0,
    ) -> "SparseCoeffs":
        """
        Parse the besov-coeffs v1 format.

        The header carries d, m and β only; p, q and r are supplied by the caller.

        Raises:
            ConfigurationError: on a malformed header or entry line
        """
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines:
            raise ConfigurationError("empty coefficient file")
        header = _parse_header(lines[0])
        d = header["d"]
        params = BesovParams(beta=header["beta"], p=p, q=q, r=r, m=header["m"])
        if params.d != d:
            raise ConfigurationError(f"header declares d={d} but beta has {params.d} entries")

        entries: Dict[Tuple[int, Tuple[int, ...]], float] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            fields = line.split()
            if len(fields) != d + 2:
                raise ConfigurationError(f"line {lineno}: expected {d + 2} fields, got {len(fields)}")
            try:
                k = int(fields[0])
                j = tuple(int(v) for v in fields[1:-1])
                alpha = float(fields[-1])
            except ValueError as e:
                raise ConfigurationError(f"line {lineno}: {e}") from e
            if not math.isfinite(alpha):
                raise ConfigurationError(f"line {lineno}: coefficient must be finite")
            if (k, j) in entries:
                raise ConfigurationError(f"line {lineno}: duplicate entry for k={k}, j={j}")
            entries[(k, j)] = alpha
        return cls.from_entries(params, entries)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        logger.debug(f"Wrote {len(self)} coefficients to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path], p: Union[float, str] = 2.0,
             q: Union[float, str] = 2.0, r: Union[float, str] = 2.0) -> "SparseCoeffs":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"coefficient file not found: {path}")
        return cls.loads(path.read_text(encoding="utf-8"), p=p, q=q, r=r)


def _parse_header(line: str) -> Dict:
    parts = [part.strip() for part in line.split(";")]
    if not parts or parts[0] != FORMAT_HEADER:
        raise ConfigurationError(f"not a {FORMAT_HEADER} file (header: {line!r})")
    fields: Dict[str, str] = {}
    for part in parts[1:]:
        if "=" not in part:
            raise ConfigurationError(f"malformed header field {part!r}")
        key, value = part.split("=", 1)
        fields[key.strip()] = value.strip()
    missing = [key for key in ("d", "m", "beta") if key not in fields]
    if missing:
        raise ConfigurationError(f"header is missing {', '.join(missing)}")
    try:
        return {
            "d": int(fields["d"]),
            "m": int(fields["m"]),
            "beta": tuple(float(b) for b in fields["beta"].split(",")),
        }
    except ValueError as e:
        raise ConfigurationError(f"malformed header: {e}") from e


def coeffs_from_level_array(params: BesovParams, k: int, dense: np.ndarray,
                            existing: Optional[SparseCoeffs] = None) -> SparseCoeffs:
    """
    Store a full level given as a dense array over J(k) (shape level_shape(k)).

    Exact zeros are omitted. When `existing` is given the level is written
    into it and it is returned.
    """
    out = existing if existing is not None else SparseCoeffs(params)
    flat = np.asarray(dense, dtype=np.float64).ravel()
    lin = np.flatnonzero(flat)
    out.set_level_linear(k, lin, flat[lin])
    return out
