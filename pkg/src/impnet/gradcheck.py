"""Central-difference verification of network gradients.

Trials cycle through the tensors (every parameter, then the network input)
and pick a random element of each, then compares the analytic derivative of the summed
batch loss with ``(L(v + eps) - L(v - eps)) / (2 eps)``. Trials where the
perturbation flips a ReLU mask or a pooling winner are kink-adjacent and
skipped. Relative error is ``|a - n| / max(|a|, |n|, 1e-4)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .layers import softmax_xent_batch
from .experiments import fan_in_init
from .model import NetworkConfig, Network, build, count_params

log = logging.getLogger(__name__)

MAX_PARAMS = 50_000
DENOM_FLOOR = 1e-4
BATCH = 2


@dataclass
class GradcheckResult:
    trials: int
    checked: int = 0
    skipped: int = 0
    worst_rel_err: float = 0.0
    worst_at: str = ""
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _same(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def check_network(net: Network, trials: int = 20, eps: float = 1e-5, tol: float = 1e-5,
                  seed: int = 0) -> GradcheckResult:
    """Compare analytic and numeric derivatives at ``trials`` random coordinates."""
    res = GradcheckResult(trials)
    if trials == 0:
        log.warning("gradcheck with 0 trials checks nothing")
        return res
    rng = np.random.Generator(np.random.PCG64(seed))
    shape = net.config.input_shape.as_tuple()
    x = rng.standard_normal((BATCH,) + shape)
    out_dim = net.shapes[-1].size
    if net.has_softmax:
        labels = rng.integers(0, out_dim, BATCH)

        def loss_of():
            return net.loss(x, labels)

        tr = net.trace(x)
        _, dlogits = softmax_xent_batch(net.logits(tr), labels)
    else:
        proj = rng.standard_normal((BATCH, out_dim))

        def loss_of():
            return float(np.sum(net.logits(net.trace(x)) * proj))

        tr = net.trace(x)
        dlogits = proj
    analytic = net.backprop(tr, dlogits, need_input_grad=True)
    targets = {name: net.params[name] for name in net.params}
    targets["input"] = x
    names = list(targets)

    for trial in range(trials):
        name = names[trial % len(names)]
        arr = targets[name]
        idx = tuple(int(rng.integers(d)) for d in arr.shape)
        base_sig = net.signature(x)
        orig = arr[idx]
        arr[idx] = orig + eps
        lp, sig_p = loss_of(), net.signature(x)
        arr[idx] = orig - eps
        lm, sig_m = loss_of(), net.signature(x)
        arr[idx] = orig
        if not (_same(sig_p, base_sig) and _same(sig_m, base_sig)):
            res.skipped += 1
            continue
        num = (lp - lm) / (2.0 * eps)
        a = float(analytic[name][idx])
        rel = abs(a - num) / max(abs(a), abs(num), DENOM_FLOOR)
        res.checked += 1
        where = f"{name}{list(idx)}"
        if rel > res.worst_rel_err:
            res.worst_rel_err, res.worst_at = rel, where
        if not rel <= tol:
            res.failures.append(f"{where}: analytic {a:.10g} numeric {num:.10g} rel err {rel:.3g}")
    return res


def gradcheck_config(config: NetworkConfig, trials: int = 20, eps: float = 1e-5,
                     tol: float = 1e-5, inject_bug: bool = False) -> GradcheckResult:
    """Build ``config`` with fan-in scaled weights and check it."""
    n = count_params(config)
    if n > MAX_PARAMS:
        raise ConfigError(f"gradcheck is limited to {MAX_PARAMS} parameters, config has {n}")
    net = build(fan_in_init(config))
    net.corrupt_backward = inject_bug
    return check_network(net, trials, eps, tol, seed=config.seed)
