"""Inspection of trained IMP networks: filter-group coherence, shift invariance, filter export.

The pre- and post-pooling taps are the outputs of layer 1 (the wide
convolution, after its activation) and layer 2 (the intermap pool).
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import CONV_KINDS, Network
from .synth import shift_frequency


def _imp_layers(net: Network):
    layers = net.config.layers
    if len(layers) < 2 or layers[0].kind not in CONV_KINDS or layers[1].kind != "intermap":
        raise ConfigError("architecture lacks an intermap layer directly after the first convolution")
    return layers[0], layers[1]


def group_windows(n_maps: int, r: int, stride: int) -> list[range]:
    return [range(s, s + r) for s in range(0, n_maps - r + 1, stride)]


def layer1_filters(net: Network) -> np.ndarray:
    """(K, M*N*G) matrix, one flattened first-layer filter per row."""
    w = net.params["L1.weights"]
    return np.reshape(w, (-1, w.shape[-1]), order="F").T


def cosine_matrix(filters: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(filters, axis=1)
    norms[norms == 0] = 1.0
    unit = filters / norms[:, None]
    return np.clip(unit @ unit.T, -1.0, 1.0)


@dataclass
class GroupCoherenceReport:
    per_group: list[float]
    within: float
    across: float
    gap: float
    neighbour: list[float] = field(default_factory=list)  # cos(filter k, filter k+1)


def group_coherence(net: Network) -> GroupCoherenceReport:
    """Mean pairwise cosine of layer-1 filters inside each pooling group vs across groups.

    Two filters count as "within" when some pooling window holds both.
    """
    _, imp = _imp_layers(net)
    filters = layer1_filters(net)
    k = len(filters)
    cos = cosine_matrix(filters)
    together = np.zeros((k, k), dtype=bool)
    per_group = []
    for win in group_windows(k, imp.r, imp.stride):
        idx = np.array(win)
        block = cos[np.ix_(idx, idx)]
        off = ~np.eye(len(idx), dtype=bool)
        per_group.append(float(block[off].mean()) if len(idx) > 1 else 1.0)
        together[np.ix_(idx, idx)] = True
    np.fill_diagonal(together, False)
    apart = ~together
    np.fill_diagonal(apart, False)
    within = float(np.mean(per_group))
    across = float(cos[apart].mean()) if apart.any() else float("nan")
    neighbour = [float(cos[i, i + 1]) for i in range(k - 1)]
    return GroupCoherenceReport(per_group, within, across, within - across, neighbour)


@dataclass
class InvarianceReport:
    shifts: list[int]
    pre: list[float]    # mean relative L2 distance at the layer-1 tap
    post: list[float]   # same at the layer-2 (intermap) tap
    ratio: list[float]  # post / pre


def _rel_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, a.ndim))
    num = np.sqrt(np.sum((a - b) ** 2, axis=axes))
    den = np.sqrt(np.sum(b ** 2, axis=axes))
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def taps(net: Network, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    tr = net.trace(X, upto=2)
    return tr.outputs[0], tr.outputs[1]


def shift_invariance(net: Network, samples: np.ndarray, max_shift: int = 2,
                     directions=(-1, 1), shifts=None) -> InvarianceReport:
    """Relative representation change under frequency shifts of noise-free samples.

    ``samples`` has shape (n, F, T, 1). For each magnitude ``s`` every sample
    is shifted by ``d * s`` for each direction ``d`` and compared with its
    unshifted version at both taps.
    """
    _imp_layers(net)
    shifts = list(range(1, max_shift + 1)) if shifts is None else list(shifts)
    base_pre, base_post = taps(net, samples)
    pre, post, ratio = [], [], []
    for s in shifts:
        d_pre, d_post = [], []
        for d in (directions if s else (1,)):
            moved = np.stack([shift_frequency(x, d * s) for x in samples])
            p, q = taps(net, moved)
            d_pre.append(_rel_dist(p, base_pre))
            d_post.append(_rel_dist(q, base_post))
        a, b = float(np.mean(d_pre)), float(np.mean(d_post))
        pre.append(a)
        post.append(b)
        ratio.append(b / a if a > 0 else (1.0 if b == 0 else float("inf")))
    return InvarianceReport(shifts, pre, post, ratio)


def clean_samples(classes, time_offsets=(0,)) -> np.ndarray:
    """Noise-free templates of every class at each time offset, (n, F, T, 1)."""
    return np.stack([c.template(o) for c in classes for o in time_offsets])


# -- filter export -------------------------------------------------------------------

def to_pgm(img: np.ndarray) -> bytes:
    """8-bit binary PGM of a 2-D array, min-max scaled; a constant image is all zeros."""
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        pix = np.round((img - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pix = np.zeros(img.shape, dtype=np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(rest, dtype=np.uint8).reshape(h, w)


def _group_size(net: Network, layer: int) -> int:
    layers = net.config.layers
    if layer < len(layers) and layers[layer].kind == "intermap":
        return layers[layer].r
    return 1


def export_filters(net: Network, layer: int, out_dir) -> list[Path]:
    """One PGM per filter of a convolution layer (1-based index), plus a raw CSV.

    Images put frequency on rows, highest bin first, and time on columns;
    the slices of a multi-map filter are placed side by side. Files are
    named ``L{layer}_g{group}_m{map}.pgm`` with ``group = map // r`` for the
    intermap layer that follows (``r = 1`` when there is none), so sorted
    file names follow map order. ``L{layer}_filters.csv`` holds every weight
    as ``map,in_map,freq,time,value`` in canonical order.
    """
    if not 1 <= layer <= len(net.config.layers) or net.config.layers[layer - 1].kind not in CONV_KINDS:
        raise ConfigError(f"layer {layer} is not a convolution layer")
    w = net.params[f"L{layer}.weights"]
    m_, n_, g_, k_ = w.shape
    r = _group_size(net, layer)
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for k in range(k_):
        img = np.concatenate([w[::-1, :, g, k] for g in range(g_)], axis=1)
        path = d / f"L{layer}_g{k // r}_m{k}.pgm"
        path.write_bytes(to_pgm(img))
        written.append(path)
    csv_path = d / f"L{layer}_filters.csv"
    with open(csv_path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["map", "in_map", "freq", "time", "value"])
        for k in range(k_):
            for g in range(g_):
                for t in range(n_):
                    for f in range(m_):
                        out.writerow([k, g, f, t, repr(float(w[f, t, g, k]))])
    written.append(csv_path)
    return written


def read_filter_csv(path, shape: tuple[int, int, int, int]) -> np.ndarray:
    w = np.zeros(shape)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            w[int(row["freq"]), int(row["time"]), int(row["in_map"]), int(row["map"])] = float(row["value"])
    return w


def write_report(path, records: list[dict]) -> None:
    """JSON-lines report, one record per metric."""
    Path(path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def report_records(coherence: GroupCoherenceReport | None,
                   invariance: InvarianceReport | None) -> list[dict]:
    recs = []
    if coherence is not None:
        for key in ("within", "across", "gap"):
            recs.append({"metric": f"coherence_{key}", "value": getattr(coherence, key)})
        recs.append({"metric": "coherence_per_group", "value": coherence.per_group})
        recs.append({"metric": "coherence_neighbour", "value": coherence.neighbour})
    if invariance is not None:
        for i, s in enumerate(invariance.shifts):
            recs.append({"metric": "invariance", "shift": s, "pre": invariance.pre[i],
                         "post": invariance.post[i], "ratio": invariance.ratio[i]})
    return recs


def as_dict(report) -> dict:
    return asdict(report)
