"""Forward and backward passes for the layer types of an intermap-pooling CNN.

Every function accepts a single tensor ``(freq, time, maps)`` or a batch
``(batch, freq, time, maps)`` and returns results with the same batch-ness.

Convolution is valid cross-correlation (no kernel flip, no padding)::

    out[i, j, k] = f( sum_{m,n,g} x[i+m, j+n, g] * W[m, n, g, k] + b[k] )

Intramap pooling takes the max of disjoint ``p x q`` blocks of each map.
Intermap pooling takes, at every position, the max over ``r`` consecutive
maps; groups start every ``stride`` maps (``stride == r`` is disjoint IMP,
``stride == 1`` is the overlapping IMPO variant).

Pooling ties go to the smallest linear index (frequency fastest within a
block) or the smallest map index, decided at forward time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .tensor import DTYPE, check_finite

log = logging.getLogger(__name__)

_warned: set = set()

RELU = "relu"
IDENTITY = "identity"
ACTIVATIONS = (RELU, IDENTITY)


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected (F, T, M) or (B, F, T, M), got shape {x.shape}")


def _unbatch(y: np.ndarray, single: bool) -> np.ndarray:
    return y[0] if single else y


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == RELU:
        return np.maximum(z, 0.0)
    if activation == IDENTITY:
        return z
    raise ValueError(f"unknown activation {activation!r}")


def _activation_grad(upstream: np.ndarray, output: np.ndarray, activation: str) -> np.ndarray:
    if activation == RELU:
        # ReLU'(0) = 0; output > 0 iff pre-activation > 0
        return upstream * (output > 0)
    return upstream


@dataclass
class LayerGrad:
    params: dict[str, np.ndarray] = field(default_factory=dict)
    input: np.ndarray | None = None


# -- convolution -----------------------------------------------------------

@dataclass
class ConvTimeLayer:
    """K filters of size M (freq) x N (time) x G (input maps), one bias per map.

    ``weights`` has shape ``(M, N, G, K)``; ``bias`` has shape ``(K,)``.
    """
    weights: np.ndarray
    bias: np.ndarray
    activation: str = RELU

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeError(f"conv weights must be (M, N, G, K), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[3],):
            raise ShapeError(f"conv bias shape {self.bias.shape} != ({self.weights.shape[3]},)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def output_dims(self, freq: int, time: int, maps: int) -> tuple[int, int, int]:
        m, n, g, k = self.weights.shape
        if g != maps:
            raise ShapeError(f"filter depth {g} != input maps {maps}")
        if m > freq or n > time:
            raise ShapeError(f"filter {m}x{n} larger than input {freq}x{time}")
        return freq - m + 1, time - n + 1, k


def _windows(x: np.ndarray, m: int, n: int) -> np.ndarray:
    # (B, I, J, G, M, N) view, no copy
    return sliding_window_view(x, (m, n), axis=(1, 2))


def conv_time_preactivation(x: np.ndarray, layer: ConvTimeLayer) -> np.ndarray:
    xb, single = _batched(x)
    m, n, _, _ = layer.weights.shape
    layer.output_dims(*xb.shape[1:])
    z = np.tensordot(_windows(xb, m, n), layer.weights, axes=([3, 4, 5], [2, 0, 1]))
    z += layer.bias
    return _unbatch(z, single)


def conv_time_forward(x: np.ndarray, layer: ConvTimeLayer) -> np.ndarray:
    out = _activate(conv_time_preactivation(x, layer), layer.activation)
    return check_finite(out, "conv output")


def conv_time_backward(x: np.ndarray, layer: ConvTimeLayer, upstream: np.ndarray,
                       output: np.ndarray | None = None,
                       need_input_grad: bool = True) -> LayerGrad:
    """Gradients w.r.t. ``weights``, ``bias`` and (optionally) the input.

    ``output`` is the forward result; it is recomputed when omitted.
    """
    xb, single = _batched(x)
    ub, _ = _batched(upstream)
    if output is None:
        output = conv_time_forward(xb, layer)
    ob, _ = _batched(output)
    m, n, g, k = layer.weights.shape
    expected = (xb.shape[0],) + layer.output_dims(*xb.shape[1:])
    if ub.shape != expected:
        raise ShapeError(f"upstream shape {ub.shape} != forward output {expected}")

    dz = _activation_grad(ub, ob, layer.activation)
    dw = np.tensordot(_windows(xb, m, n), dz, axes=([0, 1, 2], [0, 1, 2]))  # (G, M, N, K)
    grads = {"weights": np.ascontiguousarray(dw.transpose(1, 2, 0, 3)),
             "bias": dz.sum(axis=(0, 1, 2))}
    dx = None
    if need_input_grad:
        # scatter each window's gradient back onto the input positions it read
        cols = np.tensordot(dz, layer.weights, axes=([3], [3]))  # (B, I, J, M, N, G)
        dxb = np.zeros_like(xb)
        out_i, out_j = dz.shape[1], dz.shape[2]
        for a in range(m):
            for b in range(n):
                dxb[:, a:a + out_i, b:b + out_j, :] += cols[:, :, :, a, b, :]
        dx = _unbatch(dxb, single)
    return LayerGrad(params=grads, input=dx)


# -- ReLU ------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=DTYPE), 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    if np.shape(x) != np.shape(upstream):
        raise ShapeError(f"upstream shape {np.shape(upstream)} != input {np.shape(x)}")
    return upstream * (np.asarray(x) > 0)


# -- pooling ---------------------------------------------------------------

@dataclass(frozen=True)
class IntramapPoolSpec:
    p: int = 1
    q: int = 1

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ShapeError(f"pool size must be >= 1, got {self.p}x{self.q}")

    def output_dims(self, freq: int, time: int, maps: int) -> tuple[int, int, int]:
        if freq < self.p or time < self.q:
            raise ShapeError(f"pool {self.p}x{self.q} larger than input {freq}x{time}")
        return freq // self.p, time // self.q, maps


@dataclass(frozen=True)
class IntermapPoolSpec:
    r: int
    stride: int | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ShapeError(f"group size must be >= 1, got {self.r}")
        if self.stride is None:
            object.__setattr__(self, "stride", self.r)
        if not 1 <= self.stride <= self.r:
            raise ShapeError(f"stride must lie in 1..r, got {self.stride} for r={self.r}")

    @property
    def disjoint(self) -> bool:
        return self.stride == self.r

    def output_dims(self, freq: int, time: int, maps: int) -> tuple[int, int, int]:
        if maps < self.r:
            raise ShapeError(f"{maps} maps cannot form a group of {self.r}")
        if self.disjoint:
            if maps % self.r:
                raise ShapeError(f"{maps} maps not divisible into groups of {self.r}")
            return freq, time, maps // self.r
        if (maps - self.r) % self.stride:
            raise ShapeError(f"{maps} maps do not tile with r={self.r}, stride={self.stride}")
        return freq, time, (maps - self.r) // self.stride + 1


@dataclass
class ArgIndexMap:
    """Winning positions recorded by a pooling forward pass.

    ``index`` holds, per output cell, the block-local position of the max:
    ``t_offset * p + f_offset`` for intramap pooling, the in-group map
    offset for intermap pooling.
    """
    spec: IntramapPoolSpec | IntermapPoolSpec
    input_shape: tuple[int, ...]
    index: np.ndarray
    single: bool = False

    def output_shape(self) -> tuple[int, ...]:
        return self.index.shape


def intramap_pool_forward(x: np.ndarray, spec: IntramapPoolSpec) -> tuple[np.ndarray, ArgIndexMap]:
    xb, single = _batched(x)
    bsz, f, t, maps = xb.shape
    fo, to, _ = spec.output_dims(f, t, maps)
    if (fo * spec.p != f or to * spec.q != t) and (spec, f, t) not in _warned:
        _warned.add((spec, f, t))
        log.warning("intramap pool %dx%d on a %dx%d map drops the last %d bin(s) and %d frame(s)",
                    spec.p, spec.q, f, t, f - fo * spec.p, t - to * spec.q)
    blocks = xb[:, :fo * spec.p, :to * spec.q, :].reshape(bsz, fo, spec.p, to, spec.q, maps)
    # block layout (..., q, p): flattened offset t_off*p + f_off follows linear order
    blocks = blocks.transpose(0, 1, 3, 5, 4, 2).reshape(bsz, fo, to, maps, spec.q * spec.p)
    idx = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return _unbatch(out, single), ArgIndexMap(spec, xb.shape, idx, single)


def intramap_pool_backward(argmap: ArgIndexMap, upstream: np.ndarray) -> np.ndarray:
    spec = argmap.spec
    ub, _ = _batched(upstream)
    if ub.shape != argmap.index.shape:
        raise ShapeError(f"upstream shape {ub.shape} != pooled shape {argmap.index.shape}")
    bsz, fo, to, maps = ub.shape
    blocks = np.zeros((bsz, fo, to, maps, spec.q * spec.p), dtype=DTYPE)
    np.put_along_axis(blocks, argmap.index[..., None], ub[..., None], axis=-1)
    blocks = blocks.reshape(bsz, fo, to, maps, spec.q, spec.p).transpose(0, 1, 5, 2, 4, 3)
    dx = np.zeros(argmap.input_shape, dtype=DTYPE)
    dx[:, :fo * spec.p, :to * spec.q, :] = blocks.reshape(bsz, fo * spec.p, to * spec.q, maps)
    return _unbatch(dx, argmap.single)


def _intermap_disjoint(xb: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    bsz, f, t, maps = xb.shape
    groups = xb.reshape(bsz, f, t, maps // r, r)
    idx = np.argmax(groups, axis=-1)
    return np.take_along_axis(groups, idx[..., None], axis=-1)[..., 0], idx


def _intermap_windows(xb: np.ndarray, r: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    groups = sliding_window_view(xb, r, axis=3)[:, :, :, ::stride, :]
    idx = np.argmax(groups, axis=-1)
    return np.take_along_axis(groups, idx[..., None], axis=-1)[..., 0], idx


def intermap_pool_forward(x: np.ndarray, spec: IntermapPoolSpec) -> tuple[np.ndarray, ArgIndexMap]:
    xb, single = _batched(x)
    spec.output_dims(*xb.shape[1:])
    if spec.disjoint:
        out, idx = _intermap_disjoint(xb, spec.r)
    else:
        out, idx = _intermap_windows(xb, spec.r, spec.stride)
    return _unbatch(out, single), ArgIndexMap(spec, xb.shape, idx, single)


def intermap_pool_backward(argmap: ArgIndexMap, upstream: np.ndarray) -> np.ndarray:
    """Route each pooled gradient to its winning map; overlapping groups accumulate."""
    spec = argmap.spec
    ub, _ = _batched(upstream)
    if ub.shape != argmap.index.shape:
        raise ShapeError(f"upstream shape {ub.shape} != pooled shape {argmap.index.shape}")
    dx = np.zeros(argmap.input_shape, dtype=DTYPE)
    n_groups = ub.shape[3]
    last = spec.stride * (n_groups - 1) + 1
    for offset in range(spec.r):
        dx[..., offset:offset + last:spec.stride] += np.where(argmap.index == offset, ub, 0.0)
    return _unbatch(dx, argmap.single)


# -- fully connected ---------------------------------------------------------

def flatten_batch(xb: np.ndarray) -> np.ndarray:
    """(B, F, T, M) -> (B, F*T*M) in canonical frequency-fastest order."""
    return xb.transpose(0, 3, 2, 1).reshape(xb.shape[0], -1)


def unflatten_batch(v: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    f, t, m = shape
    return v.reshape(v.shape[0], m, t, f).transpose(0, 3, 2, 1)


@dataclass
class DenseLayer:
    """Affine map ``y = W x + b``; ``weights`` is ``(out_units, in_units)``.

    Outputs are shaped ``(1, 1, out_units)`` so dense layers chain like any
    other rank-3 layer.
    """
    weights: np.ndarray
    bias: np.ndarray
    activation: str = IDENTITY

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"dense weights {self.weights.shape} / bias {self.bias.shape} mismatch")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def output_dims(self, freq: int, time: int, maps: int) -> tuple[int, int, int]:
        if freq * time * maps != self.weights.shape[1]:
            raise ShapeError(f"dense layer expects {self.weights.shape[1]} inputs, "
                             f"got {freq}x{time}x{maps}")
        return 1, 1, self.weights.shape[0]


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    xb, single = _batched(x)
    layer.output_dims(*xb.shape[1:])
    z = flatten_batch(xb) @ layer.weights.T + layer.bias
    out = _activate(z, layer.activation)[:, None, None, :]
    return check_finite(_unbatch(out, single), "dense output")


def dense_backward(x: np.ndarray, layer: DenseLayer, upstream: np.ndarray,
                   output: np.ndarray | None = None,
                   need_input_grad: bool = True) -> LayerGrad:
    xb, single = _batched(x)
    ub, _ = _batched(upstream)
    if ub.shape != (xb.shape[0], 1, 1, layer.weights.shape[0]):
        raise ShapeError(f"upstream shape {ub.shape} does not match dense output")
    if output is None:
        output = dense_forward(xb, layer)
    ob, _ = _batched(output)
    dz = _activation_grad(ub, ob, layer.activation)[:, 0, 0, :]
    grads = {"weights": dz.T @ flatten_batch(xb), "bias": dz.sum(axis=0)}
    dx = None
    if need_input_grad:
        dx = _unbatch(unflatten_batch(dz @ layer.weights, xb.shape[1:]), single)
    return LayerGrad(params=grads, input=dx)


# -- objective ---------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=DTYPE)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample losses ``(B,)`` and logit gradients ``(B, C)``."""
    logits = np.asarray(logits, dtype=DTYPE)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[1] == 0:
        raise ShapeError(f"logits must be a non-empty (B, C) array, got {logits.shape}")
    if labels.shape != (logits.shape[0],) or labels.min(initial=0) < 0 \
            or labels.max(initial=0) >= logits.shape[1]:
        raise ShapeError("labels out of range for logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(labels))
    losses = log_norm - shifted[rows, labels]
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return losses, grad


def softmax_xent(logits, label: int) -> tuple[float, np.ndarray]:
    logits = np.ravel(np.asarray(logits, dtype=DTYPE))
    if logits.size == 0:
        raise ShapeError("empty logits")
    losses, grad = softmax_xent_batch(logits[None], np.array([label]))
    return float(losses[0]), grad[0]
