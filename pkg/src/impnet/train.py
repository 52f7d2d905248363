"""Minibatch SGD training driven by the epoch gate, plus frame-accuracy evaluation.

Minibatch gradients are computed in fixed-size chunks of consecutive samples.
Chunk sums are added in chunk order, so the result is bit-identical for any
number of worker threads.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError
from .model import Network
from .optim import EpochGate, SgdState, sgd_step
from .synth import Split

log = logging.getLogger(__name__)

CHUNK_SIZE = 64


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("IMPNET_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class TrainRecipe:
    learning_rate: float = 0.01
    momentum: float = 0.9
    l2_decay: float = 0.0005
    batch_size: int = 512
    epochs: int = 50
    seed: int = 0
    threads: int = 1


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_cost: float
    learning_rate: float
    decision: str


@dataclass
class TrainResult:
    history: list[EpochRecord] = field(default_factory=list)
    state: SgdState | None = None
    gate: EpochGate | None = None


def batch_grads(net: Network, X: np.ndarray, y: np.ndarray,
                pool: ThreadPoolExecutor | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss and mean gradients over ``X``, reduced chunk by chunk in order."""
    starts = range(0, len(X), CHUNK_SIZE)
    work = [(X[s:s + CHUNK_SIZE], y[s:s + CHUNK_SIZE]) for s in starts]
    if pool is None:
        parts = [net.loss_and_grads(xb, yb) for xb, yb in work]
    else:
        parts = list(pool.map(lambda a: net.loss_and_grads(*a), work))
    loss, grads = parts[0]
    grads = {k: v.copy() for k, v in grads.items()}
    for part_loss, part_grads in parts[1:]:
        loss += part_loss
        for k, v in part_grads.items():
            grads[k] += v
    n = len(X)
    return loss / n, {k: v / n for k, v in grads.items()}


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    # same schedule whether or not the previous epoch was rejected
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(epoch,))))
    return gen.permutation(n)


def train(net: Network, train_set: Split, val_set: Split, recipe: TrainRecipe,
          on_epoch=None) -> TrainResult:
    state = SgdState(recipe.learning_rate, recipe.momentum, recipe.l2_decay)
    gate = EpochGate(max_epochs=recipe.epochs)
    gate.snapshot(net.params, state)
    result = TrainResult(state=state, gate=gate)
    pool = ThreadPoolExecutor(recipe.threads) if recipe.threads > 1 else None
    try:
        for epoch in range(1, recipe.epochs + 1):
            lr = state.learning_rate
            order = epoch_order(recipe.seed, epoch, len(train_set))
            total, seen = 0.0, 0
            for start in range(0, len(order), recipe.batch_size):
                idx = order[start:start + recipe.batch_size]
                loss, grads = batch_grads(net, train_set.X[idx], train_set.y[idx], pool)
                if not math.isfinite(loss):
                    raise NonFiniteError(f"epoch {epoch}: non-finite training loss at sample {start}")
                sgd_step(net.params, grads, state)
                total += loss * len(idx)
                seen += len(idx)
            val_cost = net.mean_loss(val_set.X, val_set.y)
            decision = gate.step(val_cost, net.params, state)
            rec = EpochRecord(epoch, total / max(seen, 1), val_cost, lr, decision.value)
            result.history.append(rec)
            log.info("epoch %d loss %.5f val %.5f lr %g %s", epoch, rec.train_loss, val_cost,
                     lr, decision.value)
            if on_epoch is not None:
                on_epoch(rec)
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def accuracy(net: Network, split: Split) -> float:
    if len(split) == 0:
        return math.nan
    return float(np.mean(net.predict(split.X) == split.y))


def confusion_matrix(net: Network, split: Split, n_classes: int) -> np.ndarray:
    pred = net.predict(split.X)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (split.y, pred), 1)
    return cm


