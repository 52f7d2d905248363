import numpy as np
import pytest

from impnet.errors import NonFiniteError, ShapeError
from impnet.optim import Decision, EpochGate, SgdState, sgd_step


def scalar(v):
    return {"w": np.array([float(v)])}


def test_sgd_fixed_point():
    p = scalar(1.0)
    sgd_step(p, scalar(0.0), SgdState(l2_decay=0.0))
    assert p["w"][0] == 1.0


def test_sgd_plain_step():
    p, st = scalar(0.0), SgdState(momentum=0.0, l2_decay=0.0)
    sgd_step(p, scalar(1.0), st)
    assert p["w"][0] == -0.01 and st.velocity["w"][0] == -0.01


def test_sgd_momentum_recursion():
    p, st = scalar(0.0), SgdState(momentum=0.9, l2_decay=0.0)
    sgd_step(p, scalar(1.0), st)
    sgd_step(p, scalar(1.0), st)
    assert st.velocity["w"][0] == pytest.approx(-0.019, abs=1e-15)


def test_sgd_l2_decay_pulls_to_zero():
    p, st = scalar(2.0), SgdState(momentum=0.0, l2_decay=0.5)
    sgd_step(p, scalar(0.0), st)
    assert p["w"][0] == 2.0 - 0.01 * 0.5 * 2.0


def test_sgd_rejects_bad_input():
    with pytest.raises(ShapeError):
        sgd_step(scalar(0.0), {"v": np.zeros(1)}, SgdState())
    with pytest.raises(ShapeError):
        sgd_step(scalar(0.0), {"w": np.zeros(2)}, SgdState())
    p = scalar(1.0)
    with pytest.raises(NonFiniteError):
        sgd_step(p, scalar(np.nan), SgdState())
    assert p["w"][0] == 1.0
    with pytest.raises(ValueError):
        SgdState(learning_rate=0.0)


def test_sgd_descends_quadratic():
    # f(w) = 0.5 * c * w^2 decreases for any lr < 2 / c
    c = 4.0
    for lr in (0.01, 0.1, 0.4, 0.49):
        p, st = scalar(3.0), SgdState(learning_rate=lr, momentum=0.0, l2_decay=0.0)
        before = 0.5 * c * p["w"][0] ** 2
        sgd_step(p, {"w": c * p["w"].copy()}, st)
        assert 0.5 * c * p["w"][0] ** 2 < before


def gate_at(best):
    gate = EpochGate(best_validation_cost=best)
    params, st = scalar(1.0), SgdState()
    st.velocity = scalar(0.25)
    gate.snapshot(params, st)
    return gate, params, st


def test_gate_accept():
    gate, params, st = gate_at(1.0)
    assert gate.step(0.9, params, st) is Decision.ACCEPT
    assert gate.best_validation_cost == 0.9


def test_gate_reject_restores_and_halves():
    gate, params, st = gate_at(1.0)
    params["w"][0] = 5.0
    st.velocity["w"][0] = 7.0
    assert gate.step(1.1, params, st) is Decision.REJECT
    assert params["w"][0] == 1.0 and st.velocity["w"][0] == 0.25
    assert st.learning_rate == 0.005


def test_gate_tie_rejects():
    gate, params, st = gate_at(1.0)
    assert gate.step(1.0, params, st) is Decision.REJECT


def test_gate_nonfinite_cost():
    gate, params, st = gate_at(1.0)
    with pytest.raises(NonFiniteError):
        gate.step(float("nan"), params, st)


def test_gate_scripted_sequence(rng):
    params = {"a": rng.standard_normal((3, 4)), "b": rng.standard_normal(5)}
    st = SgdState()
    gate = EpochGate()
    gate.snapshot(params, st)
    decisions = []
    for cost in [1.0, 0.9, 0.95, 0.8]:
        accepted = {k: v.copy() for k, v in gate.best_params.items()}
        sgd_step(params, {k: rng.standard_normal(v.shape) for k, v in params.items()}, st)
        d = gate.step(cost, params, st)
        decisions.append((d, st.learning_rate))
        if d is Decision.REJECT:
            assert all(np.array_equal(params[k], accepted[k]) for k in params)
    assert decisions == [(Decision.ACCEPT, 0.01), (Decision.ACCEPT, 0.01),
                         (Decision.REJECT, 0.005), (Decision.ACCEPT, 0.005)]


def test_gate_repeated_rejections_halve_exactly():
    gate, params, st = gate_at(1.0)
    for n in range(1, 30):
        gate.step(2.0, params, st)
        assert st.learning_rate == 0.01 * 2.0 ** -n


def test_gate_finishes():
    gate, params, st = gate_at(1.0)
    gate.max_epochs = 3
    for c in (0.5, 0.4, 0.3):
        assert not gate.finished
        gate.step(c, params, st)
    assert gate.finished
