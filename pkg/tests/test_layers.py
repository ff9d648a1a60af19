import numpy as np
import pytest

from mpoxsldnet.layers import (BatchNorm, Conv2D, Dense, Dropout, Flatten,
                               MaxPool2D, ReLU, Sequential, Sigmoid, relu,
                               sigmoid)
from mpoxsldnet.rng import Xoshiro256StarStar
from oracles import central_difference, max_relative_error


def fd_check(f, x, analytic, h=1e-3, tol=1e-4):
    fd = central_difference(f, x, h=h)
    assert max_relative_error(analytic, fd) < tol


# ---------------------------------------------------------------------------
# activations

def test_relu_values():
    x = np.array([-2.0, 0.0, 3.0])
    assert np.array_equal(relu(x), np.array([0.0, 0.0, 3.0]))


def test_relu_gradient_convention_at_zero():
    layer = ReLU()
    layer.forward(np.array([-1.0, 0.0, 2.0]))
    grad = layer.backward(np.ones(3))
    assert np.array_equal(grad, np.array([0.0, 1.0, 1.0]))


def test_relu_gradient_matches_fd_away_from_zero():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(20)
    x = x[np.abs(x) > 0.05]
    layer = ReLU()
    layer.forward(x)
    analytic = layer.backward(np.ones_like(x))
    fd_check(lambda v: float(relu(v).sum()), x, analytic)


def test_sigmoid_at_zero():
    assert sigmoid(np.array([0.0]))[0] == 0.5


def test_sigmoid_saturation_is_stable():
    y = sigmoid(np.array([-40.0, -20.0], dtype=np.float64))
    assert (y > 0).all() and (y <= 1e-6).all()
    # extreme inputs underflow to exactly 0 but never overflow or NaN
    extreme = sigmoid(np.array([-800.0, 800.0], dtype=np.float64))
    assert np.isfinite(extreme).all()
    assert extreme[0] == 0.0 and extreme[1] == 1.0


def test_sigmoid_gradient_matches_fd():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(16)
    up = rng.standard_normal(16)
    layer = Sigmoid()
    layer.forward(x)
    analytic = layer.backward(up)
    fd_check(lambda v: float((sigmoid(v) * up).sum()), x, analytic)


# ---------------------------------------------------------------------------
# dense

def test_dense_identity_weights_pass_through():
    layer = Dense(3, 3, activation=None, dtype=np.float64)
    layer.w = np.eye(3)
    layer.b = np.zeros(3)
    x = np.arange(6, dtype=np.float64).reshape(2, 3)
    assert np.array_equal(layer.forward(x), x)


def test_dense_hand_case():
    layer = Dense(2, 2, activation=None, dtype=np.float64)
    layer.w = np.eye(2)
    layer.b = np.array([3.0, 4.0])
    out = layer.forward(np.array([[1.0, 2.0]]))
    assert np.array_equal(out, np.array([[4.0, 6.0]]))


def test_dense_rejects_wrong_input_dim():
    layer = Dense(5, 3)
    with pytest.raises(Exception, match="dense expects"):
        layer.forward(np.zeros((2, 4), np.float32))


@pytest.mark.parametrize("activation", [None, "relu", "sigmoid"])
def test_dense_gradients_match_fd(activation):
    rng = np.random.default_rng(2)
    layer = Dense(5, 3, activation=activation, dtype=np.float64,
                  init_rng=Xoshiro256StarStar(3))
    layer.w = rng.standard_normal((5, 3))
    layer.b = rng.standard_normal(3)
    x = rng.standard_normal((2, 5))
    up = rng.standard_normal((2, 3))

    layer.forward(x)
    gx = layer.backward(up)

    fd_check(lambda v: float((layer_forward_with(layer, v, layer.w, layer.b) * up).sum()),
             x, gx)
    fd_check(lambda v: float((layer_forward_with(layer, x, v, layer.b) * up).sum()),
             layer.w, layer.gw)
    fd_check(lambda v: float((layer_forward_with(layer, x, layer.w, v) * up).sum()),
             layer.b, layer.gb)


def layer_forward_with(layer, x, w, b):
    saved_w, saved_b = layer.w, layer.b
    layer.w, layer.b = w, b
    out = layer.forward(x)
    layer.w, layer.b = saved_w, saved_b
    return out


# ---------------------------------------------------------------------------
# batchnorm

def test_batchnorm_train_normalizes_per_channel():
    rng = np.random.default_rng(3)
    bn = BatchNorm(4, dtype=np.float64)
    x = rng.standard_normal((8, 5, 5, 4)) * 3.0 + 1.5
    out = bn.forward(x, training=True)
    assert np.abs(out.mean(axis=(0, 1, 2))).max() < 1e-5
    assert np.abs(out.var(axis=(0, 1, 2)) - 1.0).max() < 1e-4


def test_batchnorm_eval_identity_configuration():
    bn = BatchNorm(3, dtype=np.float64)
    x = np.random.default_rng(4).standard_normal((4, 3))
    out = bn.forward(x, training=False)
    assert np.allclose(out, x, atol=1e-4)  # eps shifts the scale slightly


def test_batchnorm_updates_running_stats_with_momentum():
    bn = BatchNorm(2, dtype=np.float64)
    x = np.random.default_rng(5).standard_normal((16, 2)) * 2.0 + 3.0
    bn.forward(x, training=True)
    expected_mean = 0.1 * x.mean(axis=0)
    assert np.allclose(bn.running_mean, expected_mean, atol=1e-12)
    expected_var = 0.9 * 1.0 + 0.1 * x.var(axis=0)
    assert np.allclose(bn.running_var, expected_var, atol=1e-12)


def test_batchnorm_rejects_batch_of_one_in_train_mode():
    bn = BatchNorm(2)
    with pytest.raises(ValueError, match="batch size"):
        bn.forward(np.zeros((1, 2), np.float32), training=True)


@pytest.mark.parametrize("shape", [(6, 3), (3, 4, 4, 3)])
def test_batchnorm_gradients_match_fd(shape):
    rng = np.random.default_rng(6)
    bn = BatchNorm(shape[-1], dtype=np.float64)
    bn.gamma = rng.standard_normal(shape[-1])
    bn.beta = rng.standard_normal(shape[-1])
    x = rng.standard_normal(shape)
    up = rng.standard_normal(shape)

    bn.forward(x, training=True)
    gx = bn.backward(up)

    def run(x_, gamma, beta):
        saved = bn.gamma, bn.beta
        bn.gamma, bn.beta = gamma, beta
        out = bn.forward(x_, training=True)
        bn.gamma, bn.beta = saved
        return float((out * up).sum())

    fd_check(lambda v: run(v, bn.gamma, bn.beta), x, gx)
    fd_check(lambda v: run(x, v, bn.beta), bn.gamma, bn.ggamma)
    fd_check(lambda v: run(x, bn.gamma, v), bn.beta, bn.gbeta)


# ---------------------------------------------------------------------------
# dropout

def test_dropout_rate_zero_is_identity_in_both_modes():
    layer = Dropout(0.0)
    x = np.random.default_rng(7).random((4, 5)).astype(np.float32)
    assert np.array_equal(layer.forward(x, training=True), x)
    assert np.array_equal(layer.forward(x, training=False), x)


def test_dropout_eval_mode_is_identity():
    layer = Dropout(0.7, stream=Xoshiro256StarStar(1))
    x = np.random.default_rng(8).random((4, 5)).astype(np.float32)
    assert np.array_equal(layer.forward(x, training=False), x)


def test_dropout_rejects_rate_one():
    with pytest.raises(ValueError):
        Dropout(1.0)


def test_dropout_survivor_fraction_and_mean():
    layer = Dropout(0.5, stream=Xoshiro256StarStar(9))
    x = np.ones((1000, 1000), dtype=np.float32)
    out = layer.forward(x, training=True)
    surviving = float((out != 0).mean())
    assert abs(surviving - 0.5) < 0.002
    assert abs(float(out.mean()) - 1.0) < 0.005  # inverted scaling preserves mean


def test_dropout_backward_uses_cached_mask():
    layer = Dropout(0.4, stream=Xoshiro256StarStar(10))
    x = np.ones((32, 32), dtype=np.float32)
    out = layer.forward(x, training=True)
    grad = layer.backward(np.ones_like(x))
    assert np.array_equal(grad, out)  # same mask, same scaling


# ---------------------------------------------------------------------------
# flatten, pooling layer, container

def test_flatten_shapes():
    layer = Flatten()
    assert layer.forward(np.zeros((1, 3, 3, 512), np.float32)).shape == (1, 4608)
    assert layer.forward(np.zeros((1, 7, 7, 512), np.float32)).shape == (1, 25088)


def test_flatten_roundtrip_identity():
    layer = Flatten()
    x = np.random.default_rng(11).random((2, 4, 5, 3)).astype(np.float32)
    out = layer.forward(x)
    assert np.array_equal(layer.backward(out), x)


def test_maxpool_layer_output_shape_helper():
    layer = MaxPool2D()
    assert layer.output_shape((224, 224, 16)) == (112, 112, 16)


def test_sequential_eval_forward_is_bitwise_deterministic():
    rng = Xoshiro256StarStar(12)
    model = Sequential([
        Conv2D(1, 4, activation="relu", init_rng=rng),
        BatchNorm(4),
        MaxPool2D(),
        Flatten(),
        Dense(4 * 4 * 4, 2, activation="sigmoid", init_rng=rng),
    ])
    x = np.random.default_rng(13).random((2, 8, 8, 1)).astype(np.float32)
    a = model.forward(x, training=False)
    b = model.forward(x, training=False)
    assert np.array_equal(a, b)


def test_sequential_named_params_are_live_references():
    model = Sequential([Dense(3, 2, init_rng=Xoshiro256StarStar(14))])
    params = model.named_params()
    params["00.dense.w"] += 1.0
    assert np.array_equal(model.layers[0].w, params["00.dense.w"])
