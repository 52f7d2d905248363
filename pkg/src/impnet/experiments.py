"""Matched-budget comparison runs on the synthetic spectral-shift task.

Two experiments, each a pair of variants trained on identical data:

* ``axis``: ``time`` (imp-toy) against ``freq`` (freq-toy, dense head resized
  to the same parameter budget).
* ``imp``: ``imp`` (imp-toy) against ``baseline``, the same stack with the
  intermap layer removed and the first convolution narrowed to the pooled map
  count, dense head resized to match.

Seed ``s`` selects the dataset draw, the weight draw and the epoch shuffles.
"""
from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import (NetworkConfig, Network, build, count_params, match_dense_width,
                    param_shapes, preset, with_seed)
from .synth import SynthSpec, make_dataset
from .train import TrainRecipe, accuracy, train

EXPERIMENTS = {"axis": ("time", "freq"), "imp": ("imp", "baseline")}
BUDGET_TOLERANCE = 0.10


def toy_recipe(seed: int = 0, threads: int = 1) -> TrainRecipe:
    """Short schedule for the 2000-sample synthetic task: small batches, 4 epochs."""
    return TrainRecipe(learning_rate=0.01, batch_size=32, epochs=4, seed=seed, threads=threads)


def fan_in_init(config: NetworkConfig, skip_first: bool = False) -> NetworkConfig:
    """Per-layer weight stddev sqrt(2 / fan_in) for every layer without an override.

    With 0.01 everywhere the signal through these stacks shrinks by roughly
    two orders of magnitude per layer and toy-scale training does not start.
    ``skip_first`` leaves the first weight layer at the configured stddev.
    """
    cfg = copy.deepcopy(config)
    shapes = param_shapes(cfg)
    first = next(i for i, s in enumerate(cfg.layers, 1) if s.has_params)
    for i, spec in enumerate(cfg.layers, 1):
        if skip_first and i == first:
            continue
        if spec.has_params and spec.init_std is None:
            w = shapes[f"L{i}.weights"]
            fan_in = int(np.prod(w[:3])) if len(w) == 4 else w[1]
            spec.init_std = math.sqrt(2.0 / fan_in)
    return cfg


def matched_baseline(config: NetworkConfig) -> NetworkConfig:
    """Drop the first intermap layer; keep its output map count and the parameter budget."""
    cfg = copy.deepcopy(config)
    pos = next((i for i, s in enumerate(cfg.layers) if s.kind == "intermap"), None)
    if pos is None or pos == 0 or cfg.layers[pos - 1].K is None:
        raise ConfigError("baseline needs an intermap layer directly after a convolution")
    imp = cfg.layers[pos]
    conv = cfg.layers[pos - 1]
    conv.K = (conv.K - imp.r) // imp.stride + 1
    del cfg.layers[pos]
    return match_dense_width(cfg, count_params(config))


def variant_config(name: str, size: str = "desk", classes: int | None = None) -> NetworkConfig:
    if name in ("time", "imp"):
        return preset("imp-toy", size, classes)
    if name == "freq":
        return preset("freq-toy", size, classes)
    if name == "baseline":
        return matched_baseline(preset("imp-toy", size, classes))
    raise ConfigError(f"unknown variant {name!r}")


def toy_network(config: NetworkConfig, seed: int) -> Network:
    return build(fan_in_init(with_seed(config, seed)))


def analysis_network(config: NetworkConfig, seed: int) -> Network:
    """Like :func:`toy_network` but layer 1 keeps the small configured stddev.

    Filter-coherence scores compare layer-1 filters directly; with a fan-in
    sized draw the random initial component dominates the trained filters.
    """
    return build(fan_in_init(with_seed(config, seed), skip_first=True))


def train_for_analysis(seed: int, spec: SynthSpec | None = None, threads: int = 1):
    """imp-toy trained on the seed-``seed`` synthetic draw; returns (net, data)."""
    spec = _respec(spec or SynthSpec(), seed)
    data = make_dataset(spec)
    net = analysis_network(preset("imp-toy", classes=spec.n_classes), seed)
    train(net, data["train"], data["val"], toy_recipe(seed, threads))
    return net, data


@dataclass
class CompareRow:
    seed: int
    variant: str
    train_acc: float
    test_acc_shifted: float


def run_compare(experiment: str, seeds, spec: SynthSpec | None = None,
                threads: int = 1, log=None) -> tuple[list[CompareRow], dict]:
    """Train both variants of ``experiment`` for each seed; returns rows and summary."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    spec = spec or SynthSpec()
    names = EXPERIMENTS[experiment]
    configs = {v: variant_config(v, classes=spec.n_classes) for v in names}
    counts = {v: count_params(c) for v, c in configs.items()}
    lo, hi = min(counts.values()), max(counts.values())
    if hi > lo * (1 + BUDGET_TOLERANCE):
        raise ConfigError(f"parameter budgets differ by more than {BUDGET_TOLERANCE:.0%}: {counts}")
    rows = []
    for seed in seeds:
        data = make_dataset(_respec(spec, seed))
        for v in names:
            net = toy_network(configs[v], seed)
            train(net, data["train"], data["val"], toy_recipe(seed, threads))
            row = CompareRow(seed, v, accuracy(net, data["train"]), accuracy(net, data["test"]))
            rows.append(row)
            if log is not None:
                log(row)
    summary = {
        "experiment": experiment,
        "seeds": [int(s) for s in seeds],
        "param_counts": counts,
        "median_test_acc_shifted": {v: float(np.median([r.test_acc_shifted for r in rows
                                                        if r.variant == v])) for v in names},
        "median_train_acc": {v: float(np.median([r.train_acc for r in rows if r.variant == v]))
                             for v in names},
    }
    return rows, summary


def _respec(spec: SynthSpec, seed: int) -> SynthSpec:
    out = copy.deepcopy(spec)
    out.seed = seed
    return out


def write_compare(out_dir, rows: list[CompareRow], summary: dict) -> None:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "variant", "train_acc", "test_acc_shifted"])
        for r in rows:
            w.writerow([r.seed, r.variant, repr(r.train_acc), repr(r.test_acc_shifted)])
    (d / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
