import numpy as np
import pytest

from impnet import layers as L
from impnet.errors import ConfigError, ShapeError
from impnet.experiments import fan_in_init
from impnet.model import (PRESETS, LayerSpec, NetworkConfig, build, count_params, infer_shapes,
                          load_network, parse_config, preset, save_network)
from impnet.tensor import Shape

from conftest import numeric_grad, rel_err


def cfg(shape, *layers, **kw):
    return NetworkConfig(Shape(*shape), list(layers), **kw)


def test_infer_shapes_examples():
    shapes = infer_shapes(cfg((40, 21, 1), LayerSpec("conv_time", M=40, N=5, K=8),
                              LayerSpec("intermap", r=4)))
    assert [s.as_tuple() for s in shapes] == [(1, 17, 8), (1, 17, 2)]


def test_infer_shapes_errors():
    with pytest.raises(ShapeError):
        infer_shapes(cfg((1, 2, 8), LayerSpec("conv_time", M=1, N=3, K=4)))
    with pytest.raises(ShapeError):
        infer_shapes(cfg((1, 4, 6), LayerSpec("intermap", r=4)))


def test_layer_spec_errors():
    with pytest.raises(ConfigError):
        LayerSpec("bogus")
    with pytest.raises(ConfigError):
        LayerSpec("conv_time", M=1, N=1)
    with pytest.raises(ConfigError):
        parse_config("input = 4 4 1\nlayer dense units=3 color=red\n")


def test_build_default_std():
    net = build(preset("imp-toy"))
    w = net.params["L1.weights"]
    assert abs(w.std() - 0.01) < 5 * 0.01 / np.sqrt(2 * w.size)
    b = np.concatenate([v.ravel() for k, v in net.params.items() if k.endswith("bias")])
    assert abs(b.std() - 0.5) < 0.1


def test_build_layer1_override():
    c = preset("imp-toy")
    c.layers[0].init_std = 0.05
    net = build(c)
    w1, w3 = net.params["L1.weights"], net.params["L3.weights"]
    assert abs(w1.std() - 0.05) < 5 * 0.05 / np.sqrt(2 * w1.size)
    assert abs(w3.std() - 0.01) < 5 * 0.01 / np.sqrt(2 * w3.size)


def test_deep_config_gets_wider_first_layer():
    c = preset("cnn-toy-6L")
    layers = list(c.layers)
    for _ in range(2):
        layers.insert(-2, LayerSpec("conv_time", M=1, N=1, K=32))
    deep = build(NetworkConfig(c.input_shape, layers))
    # without an explicit override build keeps the configured stddev
    assert deep.params["L1.weights"].std() < 0.02


def test_build_deterministic():
    a, b = build(preset("imp-toy")), build(preset("imp-toy"))
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_zero_params_give_uniform_scores(rng):
    c = cfg((3, 4, 1), LayerSpec("conv_time", M=3, N=2, K=2, activation=L.IDENTITY),
            LayerSpec("dense", units=4, activation=L.IDENTITY), LayerSpec("softmax", units=5))
    net = build(c)
    for v in net.params.values():
        v[...] = 0
    assert np.allclose(net.forward(rng.standard_normal((3, 4, 1))), 0.2, rtol=0, atol=1e-15)


def test_dense_identity_network(rng):
    net = build(cfg((2, 3, 1), LayerSpec("dense", units=6, activation=L.IDENTITY)))
    net.params["L1.weights"][...] = np.eye(6)
    net.params["L1.bias"][...] = 0
    x = rng.standard_normal((2, 3, 1))
    assert np.array_equal(net.forward(x), x.ravel(order="F"))


@pytest.mark.parametrize("name", PRESETS)
def test_presets_valid_and_modes_agree(name, rng):
    c = preset(name)
    net = build(c)
    x = rng.standard_normal((3,) + c.input_shape.as_tuple())
    tr = net.trace(x)
    assert [o.shape[1:] for o in tr.outputs] == [s.as_tuple() for s in infer_shapes(c)]
    assert np.array_equal(net.forward(x, "train"), net.forward(x, "eval"))


def test_backward_without_forward():
    net = build(preset("imp-toy", "tiny"))
    with pytest.raises(RuntimeError):
        net.backward(0)
    net.forward(np.zeros(net.config.input_shape.as_tuple()), "eval")
    with pytest.raises(RuntimeError):
        net.backward(0)


def test_forward_shape_mismatch():
    net = build(preset("imp-toy", "tiny"))
    with pytest.raises(ShapeError):
        net.forward(np.zeros((2, 2, 1)))


def five_layer_net():
    c = cfg((6, 6, 1), LayerSpec("conv_time", M=3, N=2, K=4), LayerSpec("intermap", r=2),
            LayerSpec("intramap", p=2, q=1), LayerSpec("dense", units=5),
            LayerSpec("softmax", units=3))
    return build(fan_in_init(c))


def test_end_to_end_finite_differences(rng):
    net = five_layer_net()
    x = rng.standard_normal((6, 6, 1))
    net.forward(x, "train")
    grads = net.backward(1)
    for name, p in net.params.items():
        num = numeric_grad(lambda: net.loss(x, [1]), p)
        assert rel_err(grads[name], num) <= 1e-5, name


def test_duplicate_filters_get_identical_gradients(rng):
    c = cfg((4, 5, 1), LayerSpec("conv_time", M=4, N=2, K=2),
            LayerSpec("dense", units=3, activation=L.IDENTITY), LayerSpec("softmax", units=2))
    net = build(fan_in_init(c))
    w = net.params["L1.weights"]
    w[..., 1] = w[..., 0]
    net.params["L1.bias"][1] = net.params["L1.bias"][0]
    # make the downstream weights symmetric in the two maps
    d = net.params["L2.weights"].reshape(3, 4, 2, order="F")
    d[..., 1] = d[..., 0]
    net.params["L2.weights"][...] = d.reshape(3, 8, order="F")
    net.forward(rng.standard_normal((4, 5, 1)), "train")
    g = net.backward(0)["L1.weights"]
    assert np.array_equal(g[..., 0], g[..., 1])


def test_confident_correct_gives_zero_gradients(rng):
    net = build(cfg((1, 1, 1), LayerSpec("softmax", units=2)))
    net.params["L1.weights"][...] = 0
    net.params["L1.bias"][...] = [800.0, 0.0]
    net.forward(rng.standard_normal((1, 1, 1)), "train")
    assert all(not g.any() for g in net.backward(0).values())


def test_snapshot_round_trip(tmp_path, rng):
    net = build(preset("imp-toy"))
    save_network(net, tmp_path / "m")
    back = load_network(tmp_path / "m")
    x = rng.standard_normal((100,) + net.config.input_shape.as_tuple())
    assert np.array_equal(net.forward(x), back.forward(x))


@pytest.mark.parametrize("name", PRESETS)
def test_config_text_round_trip(name):
    c = fan_in_init(preset(name))
    assert parse_config(c.to_text()) == c


def test_freq_toy_budget_matches_imp_toy():
    a, b = count_params(preset("imp-toy")), count_params(preset("freq-toy"))
    assert abs(a - b) <= 0.1 * a


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("resnet")
