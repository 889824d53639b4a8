"""
Explicit ReLU networks and their algebra.

A ReluNetwork is a list of affine maps (W_ℓ, b_ℓ) with ReLU applied between
consecutive maps and not after the last one:

    x ↦ (W_L η(·) + b_L) ∘ ... ∘ (W_1 x + b_1)

Its class statistics are
    L: number of affine maps (depth)
    W: largest layer width, input and output included
    S: number of nonzero weights and biases
    B: largest absolute parameter value
and are always recounted from the stored arrays.

Building blocks:
  - affine_network / identity_network / clip_unit_network / clip_network
  - sequential: compose nets, merging the last affine map of one with the
    first affine map of the next (depths add minus one)
  - stack_nonnegative: compose without merging, valid when the inner net's
    outputs are nonnegative (depths add)
  - parallel: run nets side by side on a shared input or on split inputs,
    padding shorter nets with ReLU identity layers
  - precompose_affine: net(A x + b) with unchanged depth
  - compose_with_clipping: clipped stage composition with depth Σ(L_ℓ + 1)

Weights are stored densely; S counts exact nonzeros.
"""
import json
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

NETWORK_FORMAT = "besov-relu v1"

Layer = Tuple[np.ndarray, np.ndarray]


class NetworkStats(BaseModel):
    """(L, W, S, B) of a network."""
    L: int
    W: int
    S: int
    B: float


class ReluNetwork:
    """
    Layered affine-ReLU network with exact (L, W, S, B) accounting.

    Raises:
        ConfigurationError: when consecutive layer shapes do not chain
    """

    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise ConfigurationError("a network needs at least one affine map")
        checked: List[Layer] = []
        for index, (weight, bias) in enumerate(layers):
            w = np.atleast_2d(np.asarray(weight, dtype=np.float64))
            b = np.asarray(bias, dtype=np.float64).ravel()
            if w.shape[0] != len(b):
                raise ConfigurationError(f"layer {index}: weight has {w.shape[0]} rows but bias has {len(b)} entries")
            if checked and checked[-1][0].shape[0] != w.shape[1]:
                raise ConfigurationError(
                    f"layer {index}: expects {w.shape[1]} inputs but layer {index - 1} has {checked[-1][0].shape[0]} outputs"
                )
            checked.append((w, b))
        self.layers: List[Layer] = checked

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def stats(self) -> NetworkStats:
        widths = [self.input_dim] + [w.shape[0] for w, _ in self.layers]
        nonzeros = sum(int(np.count_nonzero(w)) + int(np.count_nonzero(b)) for w, b in self.layers)
        largest = max(max(float(np.max(np.abs(w), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
                      for w, b in self.layers)
        return NetworkStats(L=self.depth, W=max(widths), S=nonzeros, B=largest)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """
        Forward pass for one input (shape (d,)) or a batch (shape (n, d)).

        Returns shape (out,) or (n, out) accordingly.
        """
        h = np.asarray(x, dtype=np.float64)
        single = h.ndim == 1
        if single:
            h = h[None, :]
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ConfigurationError(f"network expects inputs of dimension {self.input_dim}, got shape {np.shape(x)}")
        last = len(self.layers) - 1
        for index, (w, b) in enumerate(self.layers):
            h = h @ w.T + b
            if index < last:
                np.maximum(h, 0.0, out=h)
        return h[0] if single else h

    __call__ = evaluate

    def scalar(self, x: np.ndarray) -> np.ndarray:
        """Evaluate a single-output network on (n, d) points, returning (n,)."""
        if self.output_dim != 1:
            raise ConfigurationError(f"scalar() needs a single-output network, this one has {self.output_dim}")
        return self.evaluate(np.atleast_2d(x))[:, 0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": NETWORK_FORMAT,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in self.layers],
            "stats": self.stats.model_dump(),
        }

    def to_json(self) -> str:
        # json writes floats with repr, the shortest round-trip decimal
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ReluNetwork":
        if payload.get("format") != NETWORK_FORMAT:
            raise ConfigurationError(f"not a {NETWORK_FORMAT} payload")
        layers = []
        for item in payload["layers"]:
            weight = np.array(item["weight"], dtype=np.float64)
            if weight.ndim == 1:
                weight = weight.reshape(len(item["bias"]), -1)
            layers.append((weight, np.array(item["bias"], dtype=np.float64)))
        net = cls(layers)
        stored = payload.get("stats")
        if stored is not None and NetworkStats(**stored) != net.stats:
            raise ConfigurationError("stored network stats do not match the layers")
        return net

    @classmethod
    def from_json(cls, text: str) -> "ReluNetwork":
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        s = self.stats
        return f"ReluNetwork({self.input_dim}->{self.output_dim}, L={s.L}, W={s.W}, S={s.S}, B={s.B:.3g})"


# ----------------------------------------------------------------------
# Primitive networks
# ----------------------------------------------------------------------

def affine_network(A: np.ndarray, b: Optional[np.ndarray] = None) -> ReluNetwork:
    """Single affine map x ↦ A x + b (depth 1, no ReLU)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    bias = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=np.float64).ravel()
    return ReluNetwork([(A, bias)])


def identity_network(dim: int, depth: int = 1) -> ReluNetwork:
    """x ↦ x with the given number of affine maps, via x = η(x) − η(−x)."""
    if depth < 1:
        raise ConfigurationError(f"depth must be at least 1, got {depth}")
    eye = np.eye(dim)
    if depth == 1:
        return ReluNetwork([(eye, np.zeros(dim))])
    layers: List[Layer] = [(np.vstack([eye, -eye]), np.zeros(2 * dim))]
    for _ in range(depth - 2):
        layers.append((np.eye(2 * dim), np.zeros(2 * dim)))
    layers.append((np.hstack([eye, -eye]), np.zeros(dim)))
    return ReluNetwork(layers)


def clip_unit_network(dim: int = 1) -> ReluNetwork:
    """Coordinatewise t ↦ min(max(t, 0), 1) = η(t) − η(t − 1); depth 2."""
    eye = np.eye(dim)
    return ReluNetwork([
        (np.vstack([eye, eye]), np.concatenate([np.zeros(dim), -np.ones(dim)])),
        (np.hstack([eye, -eye]), np.zeros(dim)),
    ])


def clip_network(F: float, dim: int = 1) -> ReluNetwork:
    """Coordinatewise t ↦ min(max(t, −F), F) = η(t + F) − η(t − F) − F; depth 2."""
    if F <= 0:
        raise ConfigurationError(f"clip level must be positive, got {F}")
    eye = np.eye(dim)
    return ReluNetwork([
        (np.vstack([eye, eye]), np.concatenate([np.full(dim, F), np.full(dim, -F)])),
        (np.hstack([eye, -eye]), np.full(dim, -F)),
    ])


def zero_network(input_dim: int, output_dim: int = 1) -> ReluNetwork:
    return ReluNetwork([(np.zeros((output_dim, input_dim)), np.zeros(output_dim))])


# ----------------------------------------------------------------------
# Algebra
# ----------------------------------------------------------------------

def sequential(*nets: ReluNetwork) -> ReluNetwork:
    """
    Composition nets[-1] ∘ ... ∘ nets[0].

    The last affine map of each net is merged into the first affine map of
    the next, so the depth is Σ L_i − (len(nets) − 1).
    """
    if not nets:
        raise ConfigurationError("sequential needs at least one network")
    layers: List[Layer] = list(nets[0].layers)
    for net in nets[1:]:
        if net.input_dim != layers[-1][0].shape[0]:
            raise ConfigurationError(
                f"cannot compose: next net expects {net.input_dim} inputs, previous has {layers[-1][0].shape[0]} outputs"
            )
        w_prev, b_prev = layers[-1]
        w_next, b_next = net.layers[0]
        layers[-1] = (w_next @ w_prev, w_next @ b_prev + b_next)
        layers.extend(net.layers[1:])
    return ReluNetwork(layers)


def stack_nonnegative(inner: ReluNetwork, outer: ReluNetwork) -> ReluNetwork:
    """
    outer ∘ inner without merging, for an inner net whose outputs are ≥ 0.

    The ReLU inserted between them is then the identity; depths add.
    """
    if outer.input_dim != inner.output_dim:
        raise ConfigurationError(
            f"cannot compose: outer net expects {outer.input_dim} inputs, inner has {inner.output_dim} outputs"
        )
    return ReluNetwork(list(inner.layers) + list(outer.layers))


def pad_depth(net: ReluNetwork, depth: int) -> ReluNetwork:
    """Same function with exactly `depth` affine maps (identity layers appended)."""
    if depth < net.depth:
        raise ConfigurationError(f"cannot pad a depth-{net.depth} net down to {depth}")
    if depth == net.depth:
        return net
    return sequential(net, identity_network(net.output_dim, depth - net.depth + 1))


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for block in blocks:
        out[r:r + block.shape[0], c:c + block.shape[1]] = block
        r += block.shape[0]
        c += block.shape[1]
    return out


def parallel(nets: Sequence[ReluNetwork], shared_input: bool = True) -> ReluNetwork:
    """
    Run nets side by side and concatenate their outputs.

    shared_input=True feeds every net the same input; otherwise the input is
    split into consecutive blocks, one per net. Shorter nets are padded to the
    largest depth.
    """
    if not nets:
        raise ConfigurationError("parallel needs at least one network")
    if shared_input and len({net.input_dim for net in nets}) != 1:
        raise ConfigurationError("nets with a shared input must agree on the input dimension")
    depth = max(net.depth for net in nets)
    padded = [pad_depth(net, depth) for net in nets]
    layers: List[Layer] = []
    for index in range(depth):
        weights = [net.layers[index][0] for net in padded]
        biases = np.concatenate([net.layers[index][1] for net in padded])
        if index == 0 and shared_input:
            layers.append((np.vstack(weights), biases))
        else:
            layers.append((_block_diag(weights), biases))
    return ReluNetwork(layers)


def linear_readout(net: ReluNetwork, weights: np.ndarray, bias: float = 0.0) -> ReluNetwork:
    """x ↦ weightsᵀ net(x) + bias, merged into the last layer."""
    w = np.asarray(weights, dtype=np.float64).reshape(1, -1)
    return sequential(net, affine_network(w, np.array([bias])))


def precompose_affine(net: ReluNetwork, A: np.ndarray, b: Optional[np.ndarray] = None) -> ReluNetwork:
    """
    x ↦ net(A x + b), merged into the first layer:
    W_1' = W_1 A and b_1' = b_1 + W_1 b. Depth is unchanged.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    shift = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=np.float64).ravel()
    if A.shape[0] != net.input_dim or len(shift) != net.input_dim:
        raise ConfigurationError(
            f"affine map has {A.shape[0]} outputs but the network expects {net.input_dim} inputs"
        )
    w1, b1 = net.layers[0]
    return ReluNetwork([(w1 @ A, b1 + w1 @ shift)] + list(net.layers[1:]))


def compose_with_clipping(nets: Sequence[ReluNetwork]) -> ReluNetwork:
    """
    Clipped composition clip ∘ h_H ∘ ... ∘ clip ∘ h_1.

    Every stage output is clipped into [0,1] with the two-ReLU gadget. The
    gadget's first map merges into the stage's last map and the clipped
    values (≥ 0) feed the next stage through a ReLU, so the depth is
    Σ (L_ℓ + 1).
    """
    if not nets:
        raise ConfigurationError("compose_with_clipping needs at least one network")
    result: Optional[ReluNetwork] = None
    for index, net in enumerate(nets):
        clipped = sequential(net, clip_unit_network(net.output_dim))
        if result is None:
            result = clipped
        else:
            if net.input_dim != result.output_dim:
                raise ConfigurationError(
                    f"stage {index} expects {net.input_dim} inputs but stage {index - 1} has {result.output_dim} outputs"
                )
            result = stack_nonnegative(result, clipped)
    return result


NetworkLike = Union[ReluNetwork, Sequence[Layer]]
