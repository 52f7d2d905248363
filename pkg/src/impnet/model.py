"""Network configuration, shape inference, initialization and forward/backward orchestration.

Config text format (one statement per line, ``#`` starts a comment)::

    input = 40 21 1            # freq time maps
    seed = 0
    weight_std = 0.01
    bias_std = 0.5
    layer conv_time M=40 N=5 K=64 act=relu
    layer intermap r=4 stride=4
    layer conv_time M=1 N=3 K=32 std=0.05
    layer intramap p=1 q=2
    layer dense units=256 act=relu
    layer softmax classes=5

Layer kinds and their keys:

    conv_time, conv_freq   M N K [act=relu|identity] [std]
    relu
    intramap               [p=1] [q=1]
    intermap               r [stride=r]
    dense                  units [act=relu|identity] [std]
    softmax                classes [std]

``std`` overrides the weight stddev of that layer; biases always use
``bias_std``. Parameters are drawn in layer order (weights, then bias) from a
single GaussianSource seeded with ``seed``, each laid out in canonical
(first-axis-fastest) order.
"""
from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import layers as L
from .errors import ConfigError, DataError, ShapeError
from .tensor import DTYPE, GaussianSource, Shape, load_tensor, save_tensor

log = logging.getLogger(__name__)

CONV_KINDS = ("conv_time", "conv_freq")
PARAM_KINDS = CONV_KINDS + ("dense", "softmax")
KINDS = CONV_KINDS + ("relu", "intramap", "intermap", "dense", "softmax")

DEFAULT_WEIGHT_STD = 0.01
DEFAULT_BIAS_STD = 0.5
DEEP_LAYER1_STD = 0.05
DEEP_THRESHOLD = 7


@dataclass
class LayerSpec:
    kind: str
    M: int | None = None
    N: int | None = None
    K: int | None = None
    p: int = 1
    q: int = 1
    r: int | None = None
    stride: int | None = None
    units: int | None = None
    activation: str = L.RELU
    init_std: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind in CONV_KINDS and None in (self.M, self.N, self.K):
            raise ConfigError(f"{self.kind} needs M, N and K")
        if self.kind in ("dense", "softmax") and self.units is None:
            raise ConfigError(f"{self.kind} needs a unit/class count")
        if self.kind == "intermap":
            if self.r is None:
                raise ConfigError("intermap needs r")
            if self.stride is None:
                self.stride = self.r
        if self.activation not in L.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.kind == "softmax":
            self.activation = L.IDENTITY

    @property
    def has_params(self) -> bool:
        return self.kind in PARAM_KINDS

    def to_line(self) -> str:
        k = self.kind
        if k in CONV_KINDS:
            parts = [f"M={self.M}", f"N={self.N}", f"K={self.K}", f"act={self.activation}"]
        elif k == "intramap":
            parts = [f"p={self.p}", f"q={self.q}"]
        elif k == "intermap":
            parts = [f"r={self.r}", f"stride={self.stride}"]
        elif k == "dense":
            parts = [f"units={self.units}", f"act={self.activation}"]
        elif k == "softmax":
            parts = [f"classes={self.units}"]
        else:
            parts = []
        if self.init_std is not None:
            parts.append(f"std={self.init_std!r}")
        return " ".join(["layer", k] + parts)


@dataclass
class NetworkConfig:
    input_shape: Shape = field(default_factory=lambda: Shape(40, 21, 1))
    layers: list[LayerSpec] = field(default_factory=list)
    seed: int = 0
    weight_std: float = DEFAULT_WEIGHT_STD
    bias_std: float = DEFAULT_BIAS_STD

    def to_text(self) -> str:
        lines = [
            "# impnet network config",
            "input = " + " ".join(str(d) for d in self.input_shape.as_tuple()),
            f"seed = {self.seed}",
            f"weight_std = {self.weight_std!r}",
            f"bias_std = {self.bias_std!r}",
        ]
        lines += [spec.to_line() for spec in self.layers]
        return "\n".join(lines) + "\n"

    @property
    def n_classes(self) -> int:
        return infer_shapes(self)[-1].size


_LAYER_KEYS = {
    "conv_time": {"M", "N", "K", "act", "std"},
    "conv_freq": {"M", "N", "K", "act", "std"},
    "relu": set(),
    "intramap": {"p", "q"},
    "intermap": {"r", "stride"},
    "dense": {"units", "act", "std"},
    "softmax": {"classes", "std"},
}


def _parse_layer(tokens: list[str], lineno: int) -> LayerSpec:
    if not tokens:
        raise ConfigError(f"line {lineno}: 'layer' needs a kind")
    kind, args = tokens[0], {}
    if kind not in _LAYER_KEYS:
        raise ConfigError(f"line {lineno}: unknown layer kind {kind!r}")
    for tok in tokens[1:]:
        key, sep, val = tok.partition("=")
        if not sep or key not in _LAYER_KEYS[kind]:
            raise ConfigError(f"line {lineno}: unexpected argument {tok!r} for {kind}")
        args[key] = val
    kw = {}
    try:
        for key, val in args.items():
            if key == "act":
                kw["activation"] = val
            elif key == "std":
                kw["init_std"] = float(val)
            elif key == "classes":
                kw["units"] = int(val)
            else:
                kw[key] = int(val)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: {exc}") from exc
    if kind == "softmax":
        kw.setdefault("activation", L.IDENTITY)
    try:
        return LayerSpec(kind, **kw)
    except ConfigError as exc:
        raise ConfigError(f"line {lineno}: {exc}") from exc


def parse_config(text: str) -> NetworkConfig:
    cfg = NetworkConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("layer ") or line == "layer":
            cfg.layers.append(_parse_layer(line.split()[1:], lineno))
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value' or 'layer ...'")
        try:
            if key == "input":
                cfg.input_shape = Shape(*(int(v) for v in val.split()))
            elif key == "seed":
                cfg.seed = int(val)
            elif key == "weight_std":
                cfg.weight_std = float(val)
            elif key == "bias_std":
                cfg.bias_std = float(val)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except (TypeError, ValueError, ShapeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    if not cfg.layers:
        raise ConfigError("config declares no layers")
    return cfg


def load_config(path) -> NetworkConfig:
    return parse_config(Path(path).read_text())


# -- shape inference -----------------------------------------------------------

def _step_dims(spec: LayerSpec, dims: tuple[int, int, int]) -> tuple[int, int, int]:
    f, t, m = dims
    if spec.kind in CONV_KINDS:
        if spec.M > f:
            raise ShapeError(f"frequency underflow: filter height {spec.M} > {f} bins")
        if spec.N > t:
            raise ShapeError(f"time underflow: filter width {spec.N} > {t} steps")
        return f - spec.M + 1, t - spec.N + 1, spec.K
    if spec.kind == "relu":
        return dims
    if spec.kind == "intramap":
        if spec.p > f or spec.q > t:
            raise ShapeError(f"pool underflow: {spec.p}x{spec.q} pool on {f}x{t} maps")
        return L.IntramapPoolSpec(spec.p, spec.q).output_dims(f, t, m)
    if spec.kind == "intermap":
        return L.IntermapPoolSpec(spec.r, spec.stride).output_dims(f, t, m)
    return 1, 1, spec.units


def infer_shapes(config: NetworkConfig) -> list[Shape]:
    """Output shape of every layer, in order.

    Raises ShapeError naming the first layer that cannot be applied.
    """
    kinds = [s.kind for s in config.layers]
    if kinds.count("softmax") > 1 or ("softmax" in kinds and kinds[-1] != "softmax"):
        raise ShapeError("at most one softmax layer is allowed and it must be last")
    dims = config.input_shape.as_tuple()
    shapes = []
    for i, spec in enumerate(config.layers, 1):
        try:
            dims = _step_dims(spec, dims)
            shapes.append(Shape(*dims))
        except ShapeError as exc:
            raise ShapeError(f"layer {i} ({spec.kind}): {exc}") from None
    return shapes


def param_shapes(config: NetworkConfig) -> dict[str, tuple[int, ...]]:
    shapes = infer_shapes(config)
    dims = [config.input_shape] + shapes
    out = {}
    for i, spec in enumerate(config.layers, 1):
        if spec.kind in CONV_KINDS:
            out[f"L{i}.weights"] = (spec.M, spec.N, dims[i - 1].maps, spec.K)
            out[f"L{i}.bias"] = (spec.K,)
        elif spec.kind in ("dense", "softmax"):
            out[f"L{i}.weights"] = (spec.units, dims[i - 1].size)
            out[f"L{i}.bias"] = (spec.units,)
    return out


def count_params(config: NetworkConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


# -- network ---------------------------------------------------------------------

class _Unit:
    """One instantiated layer; forward returns (output, cache)."""

    def __init__(self, index: int, spec: LayerSpec, params: dict[str, np.ndarray]):
        self.index = index
        self.spec = spec
        self.params = params

    @property
    def wname(self) -> str:
        return f"L{self.index}.weights"

    @property
    def bname(self) -> str:
        return f"L{self.index}.bias"

    def layer(self):
        w, b = self.params[self.wname], self.params[self.bname]
        if self.spec.kind in CONV_KINDS:
            return L.ConvTimeLayer(w, b, self.spec.activation)
        act = L.IDENTITY if self.spec.kind == "softmax" else self.spec.activation
        return L.DenseLayer(w, b, act)

    def forward(self, xb):
        kind = self.spec.kind
        if kind in CONV_KINDS:
            return L.conv_time_forward(xb, self.layer()), xb
        if kind in ("dense", "softmax"):
            return L.dense_forward(xb, self.layer()), xb
        if kind == "relu":
            return L.relu_forward(xb), xb
        if kind == "intramap":
            return L.intramap_pool_forward(xb, L.IntramapPoolSpec(self.spec.p, self.spec.q))
        return L.intermap_pool_forward(xb, L.IntermapPoolSpec(self.spec.r, self.spec.stride))

    def backward(self, cache, out, dy, need_dx):
        kind = self.spec.kind
        if kind in CONV_KINDS:
            g = L.conv_time_backward(cache, self.layer(), dy, out, need_dx)
        elif kind in ("dense", "softmax"):
            g = L.dense_backward(cache, self.layer(), dy, out, need_dx)
        elif kind == "relu":
            return L.relu_backward(cache, dy), {}
        elif kind == "intramap":
            return L.intramap_pool_backward(cache, dy), {}
        else:
            return L.intermap_pool_backward(cache, dy), {}
        return g.input, {self.wname: g.params["weights"], self.bname: g.params["bias"]}

    def signature(self, cache, out):
        """Discrete decisions taken by this layer (ReLU masks, pooling winners)."""
        kind = self.spec.kind
        if kind == "relu" or (self.spec.has_params and self.spec.activation == L.RELU
                              and kind != "softmax"):
            return out > 0
        if kind in ("intramap", "intermap"):
            return cache.index
        return None


@dataclass
class ForwardTrace:
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    caches: list = field(default_factory=list)
    single: bool = False


class Network:
    """An instantiated layer stack with parameters in network order.

    ``params`` maps ``L{i}.weights`` / ``L{i}.bias`` (1-based layer index) to
    arrays; convolution weights are ``(M, N, G, K)``, dense weights
    ``(out, in)``.
    """

    def __init__(self, config: NetworkConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.shapes = infer_shapes(config)
        expected = param_shapes(config)
        if list(params) != list(expected):
            raise ShapeError(f"parameter names {list(params)} != {list(expected)}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeError(f"{name}: shape {params[name].shape} != {shape}")
            # one memory layout regardless of origin, so BLAS sums in the same order
            params[name] = np.ascontiguousarray(params[name], dtype=DTYPE)
        self.params = params
        self.units = [_Unit(i, spec, params) for i, spec in enumerate(config.layers, 1)]
        self._trace: ForwardTrace | None = None
        self.corrupt_backward = False

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    @property
    def has_softmax(self) -> bool:
        return self.config.layers[-1].kind == "softmax"

    def copy(self) -> "Network":
        return Network(copy.deepcopy(self.config), {k: v.copy() for k, v in self.params.items()})

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=DTYPE)
        single = x.ndim == 3
        xb = x[None] if single else x
        if xb.ndim != 4 or xb.shape[1:] != self.config.input_shape.as_tuple():
            raise ShapeError(f"input shape {x.shape} != network input "
                             f"{self.config.input_shape.as_tuple()}")
        return xb, single

    def trace(self, x, upto: int | None = None) -> ForwardTrace:
        """Run the first ``upto`` layers (all by default), keeping every intermediate."""
        xb, single = self._check_input(x)
        tr = ForwardTrace(single=single)
        h = xb
        for unit in self.units[:upto]:
            tr.inputs.append(h)
            h, cache = unit.forward(h)
            tr.outputs.append(h)
            tr.caches.append(cache)
        return tr

    def logits(self, tr: ForwardTrace) -> np.ndarray:
        return tr.outputs[-1].reshape(len(tr.outputs[-1]), -1)

    def forward(self, x, mode: str = "eval") -> np.ndarray:
        """Class scores: softmax probabilities when the last layer is softmax.

        ``mode="train"`` keeps activations and pooling winners for ``backward``.
        """
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        tr = self.trace(x)
        self._trace = tr if mode == "train" else None
        z = self.logits(tr)
        scores = L.softmax(z) if self.has_softmax else z
        return scores[0] if tr.single else scores

    def backward(self, label) -> dict[str, np.ndarray]:
        """Gradients of the mean cross-entropy of the cached forward batch."""
        if self._trace is None:
            raise RuntimeError("backward() called without a preceding forward(mode='train')")
        tr = self._trace
        labels = np.atleast_1d(np.asarray(label, dtype=np.int64))
        _, dz = L.softmax_xent_batch(self.logits(tr), labels)
        grads = self.backprop(tr, dz)
        return {k: v / len(labels) for k, v in grads.items()}

    def backprop(self, tr: ForwardTrace, dlogits: np.ndarray,
                 need_input_grad: bool = False) -> dict[str, np.ndarray]:
        """Parameter gradients for an upstream gradient on the logits.

        With ``need_input_grad`` the input gradient is stored under ``"input"``.
        """
        dy = dlogits.reshape(tr.outputs[-1].shape)
        grads: dict[str, np.ndarray] = {}
        for pos in range(len(self.units) - 1, -1, -1):
            unit = self.units[pos]
            need_dx = pos > 0 or need_input_grad
            dy, g = unit.backward(tr.caches[pos], tr.outputs[pos], dy, need_dx)
            grads.update(g)
        if self.corrupt_backward:
            first = next(iter(self.params))
            grads[first] = grads[first] * 1.1
        ordered = {name: grads[name] for name in self.params}
        if need_input_grad:
            ordered["input"] = dy[0] if tr.single else dy
        return ordered

    def loss_and_grads(self, xb: np.ndarray, labels: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        """Summed (not averaged) loss and parameter gradients over a batch."""
        tr = self.trace(xb)
        losses, dz = L.softmax_xent_batch(self.logits(tr), labels)
        return float(losses.sum()), self.backprop(tr, dz)

    def loss(self, x, labels) -> float:
        tr = self.trace(x)
        losses, _ = L.softmax_xent_batch(self.logits(tr), np.atleast_1d(labels))
        return float(losses.sum())

    def signature(self, x) -> list[np.ndarray]:
        tr = self.trace(x)
        sig = []
        for unit, cache, out in zip(self.units, tr.caches, tr.outputs):
            s = unit.signature(cache, out)
            if s is not None:
                sig.append(s)
        return sig

    def predict_scores(self, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
        chunks = [self.forward(X[i:i + batch_size]) for i in range(0, len(X), batch_size)]
        return np.concatenate(chunks, axis=0)

    def predict(self, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
        return np.argmax(self.predict_scores(X, batch_size), axis=1)

    def mean_loss(self, X: np.ndarray, y: np.ndarray, batch_size: int = 256) -> float:
        total = 0.0
        for i in range(0, len(X), batch_size):
            total += self.loss(X[i:i + batch_size], y[i:i + batch_size])
        return total / len(X)


def build(config: NetworkConfig) -> Network:
    shapes = param_shapes(config)
    src = GaussianSource(config.seed)
    params: dict[str, np.ndarray] = {}
    for i, spec in enumerate(config.layers, 1):
        if not spec.has_params:
            continue
        w_std = config.weight_std if spec.init_std is None else spec.init_std
        for name, std in ((f"L{i}.weights", w_std), (f"L{i}.bias", config.bias_std)):
            shape = shapes[name]
            draws = src.normal(int(np.prod(shape)), 0.0, std)
            params[name] = np.reshape(draws, shape, order="F")
    return Network(config, params)


# -- presets ---------------------------------------------------------------------

PRESETS = ("cnn-toy-6L", "imp-toy", "impo-toy", "freq-toy")


def weight_layer_count(config: NetworkConfig) -> int:
    return sum(1 for s in config.layers if s.has_params)


def apply_depth_init(config: NetworkConfig) -> NetworkConfig:
    """Deep stacks get a wider layer-1 weight distribution unless already overridden."""
    if weight_layer_count(config) > DEEP_THRESHOLD:
        first = next(s for s in config.layers if s.has_params)
        if first.init_std is None:
            first.init_std = DEEP_LAYER1_STD
    return config


def match_dense_width(config: NetworkConfig, target: int) -> NetworkConfig:
    """Resize the first dense layer so the parameter count lands nearest ``target``."""
    pos = next((i for i, s in enumerate(config.layers) if s.kind == "dense"), None)
    if pos is None:
        raise ConfigError("config has no dense layer to resize")
    cfg = copy.deepcopy(config)
    cfg.layers[pos].units = 1
    base = count_params(cfg)
    cfg.layers[pos].units = 2
    slope = count_params(cfg) - base
    cfg.layers[pos].units = max(1, int(round(1 + (target - base) / slope)))
    return cfg


def _stack(kind: str, first: tuple[int, int], first_maps: int, small: tuple[int, int],
           r: int | None, stride: int | None, maps: int, blocks: int, pool: tuple[int, int],
           dense: int, classes: int) -> list[LayerSpec]:
    specs = [LayerSpec(kind, M=first[0], N=first[1], K=first_maps)]
    if r is not None:
        specs.append(LayerSpec("intermap", r=r, stride=stride))
    for _ in range(blocks):
        specs += [LayerSpec(kind, M=small[0], N=small[1], K=maps),
                  LayerSpec(kind, M=small[0], N=small[1], K=maps),
                  LayerSpec("intramap", p=pool[0], q=pool[1])]
    specs += [LayerSpec("dense", units=dense), LayerSpec("softmax", units=classes,
                                                         activation=L.IDENTITY)]
    return specs


def preset(name: str, size: str = "desk", classes: int | None = None, seed: int = 0) -> NetworkConfig:
    """Desk-scale analogues of the time-axis IMP CNN family.

    ``size="tiny"`` keeps the structure but shrinks every dimension for
    finite-difference checking.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if size not in ("desk", "tiny"):
        raise ConfigError(f"unknown preset size {size!r}")
    tiny = size == "tiny"
    classes = classes or (3 if tiny else 5)
    first_maps, r, maps, dense = (4, 2, 3, 6) if tiny else (64, 4, 32, 256)
    time_in = Shape(6, 21, 1) if tiny else Shape(40, 21, 1)

    if name == "cnn-toy-6L":
        base_maps = first_maps // r
        specs = [LayerSpec("conv_time", M=time_in.freq_bins, N=5, K=base_maps),
                 LayerSpec("conv_time", M=1, N=3, K=maps),
                 LayerSpec("conv_time", M=1, N=3, K=maps),
                 LayerSpec("intramap", p=1, q=2),
                 LayerSpec("conv_time", M=1, N=3, K=maps),
                 LayerSpec("intramap", p=1, q=2),
                 LayerSpec("dense", units=dense),
                 LayerSpec("softmax", units=classes, activation=L.IDENTITY)]
        cfg = NetworkConfig(time_in, specs, seed)
    elif name in ("imp-toy", "impo-toy"):
        stride = r if name == "imp-toy" else 1
        specs = _stack("conv_time", (time_in.freq_bins, 5), first_maps, (1, 3), r, stride,
                       maps, 2, (1, 2), dense, classes)
        cfg = NetworkConfig(time_in, specs, seed)
    else:
        # time and frequency roles swapped: filters span the whole context window
        freq_in = Shape(21, 6, 1) if tiny else time_in
        specs = _stack("conv_freq", (5, freq_in.time_steps), first_maps, (3, 1), r, r,
                       maps, 2, (2, 1), dense, classes)
        cfg = NetworkConfig(freq_in, specs, seed)
        cfg = match_dense_width(cfg, count_params(preset("imp-toy", size, classes, seed)))
    infer_shapes(cfg)
    return apply_depth_init(cfg)


# -- snapshots ---------------------------------------------------------------------

SNAPSHOT_FORMAT = "impnet-snapshot"


def _to_rank3(a: np.ndarray) -> np.ndarray:
    if a.ndim == 1:
        return a.reshape(1, 1, -1)
    if a.ndim == 2:
        return a.reshape(a.shape[0], a.shape[1], 1)
    if a.ndim == 3:
        return a
    # (M, N, G, K) -> (M, N, G*K), map index g + G*k
    return a.reshape(a.shape[0], a.shape[1], -1, order="F")


def save_network(net: Network, directory, sgd_state=None) -> None:
    """Write ``config.txt``, ``manifest.json`` and one tensor container per parameter.

    Optimizer velocity, when given, goes under ``velocity/`` with the same names.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.txt").write_text(net.config.to_text())
    entries = []
    for name, arr in net.params.items():
        fname = f"{name}.impt"
        save_tensor(d / fname, _to_rank3(arr))
        entries.append({"name": name, "shape": list(arr.shape), "file": fname})
    manifest = {"format": SNAPSHOT_FORMAT, "version": 1, "config": "config.txt", "params": entries}
    if sgd_state is not None:
        (d / "velocity").mkdir(exist_ok=True)
        for name, v in sgd_state.velocity.items():
            save_tensor(d / "velocity" / f"{name}.impt", _to_rank3(v))
        manifest["optimizer"] = {"learning_rate": sgd_state.learning_rate,
                                 "momentum": sgd_state.momentum,
                                 "l2_decay": sgd_state.l2_decay,
                                 "velocity": [f"velocity/{n}.impt" for n in sgd_state.velocity]}
    tmp = d / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2) + "\n")
    tmp.replace(d / "manifest.json")


def load_network(directory) -> Network:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{d}: unreadable snapshot manifest: {exc}") from exc
    if manifest.get("format") != SNAPSHOT_FORMAT:
        raise DataError(f"{d}: not an impnet snapshot")
    config = load_config(d / manifest["config"])
    params = {}
    for entry in manifest["params"]:
        t = load_tensor(d / entry["file"])
        params[entry["name"]] = np.reshape(t, tuple(entry["shape"]), order="F").copy()
    return Network(config, params)


def with_seed(config: NetworkConfig, seed: int) -> NetworkConfig:
    return replace(copy.deepcopy(config), seed=seed)
