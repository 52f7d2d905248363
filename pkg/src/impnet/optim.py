"""SGD with momentum and L2 decay, and the per-epoch accept/reject gate."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ShapeError


@dataclass
class SgdState:
    learning_rate: float = 0.01
    momentum: float = 0.9
    l2_decay: float = 0.0005
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.l2_decay < 0:
            raise ValueError("l2_decay must be non-negative")


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: SgdState) -> None:
    """In-place update of ``params`` and ``state.velocity``::

        v <- momentum * v - lr * (grad + l2_decay * param)
        param <- param + v

    ``grads`` are expected to be minibatch means.
    """
    if grads.keys() != params.keys():
        raise ShapeError(f"gradient names {sorted(grads)} != parameter names {sorted(params)}")
    updates = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
        v = state.momentum * v - state.learning_rate * (g + state.l2_decay * p)
        if not np.all(np.isfinite(v)):
            raise NonFiniteError(f"non-finite update for {name}")
        updates[name] = v
    # commit only after every update has been validated
    for name, v in updates.items():
        state.velocity[name] = v
        params[name] += v


class Decision(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass
class EpochGate:
    """Keeps the last accepted model; rejects epochs whose validation cost did not drop.

    A rejection restores parameters and velocity from the snapshot and halves
    the learning rate. Acceptance requires a strict decrease.
    """
    max_epochs: int = 50
    best_validation_cost: float = math.inf
    epoch_counter: int = 0
    best_params: dict[str, np.ndarray] = field(default_factory=dict)
    best_velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def snapshot(self, params: dict[str, np.ndarray], state: SgdState) -> None:
        self.best_params = {k: v.copy() for k, v in params.items()}
        self.best_velocity = {k: v.copy() for k, v in state.velocity.items()}

    @property
    def finished(self) -> bool:
        return self.epoch_counter >= self.max_epochs

    def step(self, new_cost: float, params: dict[str, np.ndarray], state: SgdState) -> Decision:
        if not math.isfinite(new_cost):
            raise NonFiniteError(f"validation cost is {new_cost}")
        self.epoch_counter += 1
        if new_cost < self.best_validation_cost:
            self.best_validation_cost = new_cost
            self.snapshot(params, state)
            return Decision.ACCEPT
        for name, p in params.items():
            np.copyto(p, self.best_params[name])
        state.velocity = {k: v.copy() for k, v in self.best_velocity.items()}
        state.learning_rate *= 0.5
        return Decision.REJECT
