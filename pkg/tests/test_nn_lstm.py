import numpy as np
import pytest

from roadslice.nn import (
    LstmLayer,
    finite_diff_grad,
    lstm_sequence_forward,
    lstm_step,
    max_rel_error,
    mse_loss,
)


def zeroed_layer(n_in, g):
    layer = LstmLayer(n_in, g, np.random.default_rng(0))
    layer.wx[...] = 0.0
    layer.wh[...] = 0.0
    layer.b[...] = 0.0
    return layer


def test_all_zero_step_gives_zero_state():
    layer = zeroed_layer(3, 4)
    h, c = lstm_step(layer, np.zeros(3), np.zeros(4), np.zeros(4))
    assert np.allclose(h, 0.0) and np.allclose(c, 0.0)


def test_saturated_forget_gate_preserves_cell():
    layer = zeroed_layer(3, 4)
    layer.b[4:8] = 100.0  # forget gate saturated open
    c_prev = np.array([0.3, -0.2, 0.7, 1.1])
    h, c = lstm_step(layer, np.zeros(3), np.zeros(4), c_prev)
    assert np.allclose(c, c_prev, atol=1e-10)


def test_single_step_equals_length_one_sequence():
    rng = np.random.default_rng(3)
    layer = LstmLayer(3, 5, rng)
    x = rng.normal(size=3)
    h_step, _ = lstm_step(layer, x, np.zeros(5), np.zeros(5))
    h_seq = layer.forward(x[None, None, :], return_sequences=False)
    assert np.allclose(h_step, h_seq[0])


def test_stack_bottleneck_width():
    rng = np.random.default_rng(0)
    layers = [LstmLayer(24, 128, rng), LstmLayer(128, 64, rng)]
    xs = rng.normal(size=(2, 16, 24))
    out = lstm_sequence_forward(layers, xs, return_sequences=False)
    assert out.shape == (2, 64)
    seq = lstm_sequence_forward(layers, xs, return_sequences=True)
    assert seq.shape == (2, 16, 64)
    assert np.allclose(seq[:, -1], out)


def test_empty_sequence_rejected():
    layer = LstmLayer(3, 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        layer.forward(np.empty((1, 0, 3)))
    with pytest.raises(ValueError):
        lstm_sequence_forward([], np.ones((1, 2, 3)))


def test_shape_mismatch_rejected():
    layer = LstmLayer(3, 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        layer.step(np.ones((2, 5)), np.zeros((2, 4)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        layer.step(np.ones((2, 3)), np.zeros((2, 5)), np.zeros((2, 4)))


@pytest.mark.parametrize("seed", range(20))
def test_backward_through_time_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    layer = LstmLayer(2, 2, rng)
    xs = rng.normal(size=(2, 3, 2))
    target = rng.normal(size=(2, 3, 2))

    def loss_fn():
        return mse_loss(layer.forward(xs, return_sequences=True), target)[0]

    out = layer.forward(xs, return_sequences=True)
    _, g = mse_loss(out, target)
    layer.zero_grad()
    gx = layer.backward(g)
    for name, p in layer.params().items():
        num = finite_diff_grad(loss_fn, p)
        assert max_rel_error(layer.grads()[name], num) < 1e-5, name
    num_x = finite_diff_grad(loss_fn, xs)
    assert max_rel_error(gx, num_x) < 1e-5


@pytest.mark.parametrize("seed", range(5))
def test_return_last_gradients(seed):
    rng = np.random.default_rng(500 + seed)
    layer = LstmLayer(3, 2, rng)
    xs = rng.normal(size=(1, 4, 3))
    target = rng.normal(size=(1, 2))

    def loss_fn():
        return mse_loss(layer.forward(xs, return_sequences=False), target)[0]

    out = layer.forward(xs, return_sequences=False)
    _, g = mse_loss(out, target)
    layer.zero_grad()
    layer.backward(g)
    for name, p in layer.params().items():
        num = finite_diff_grad(loss_fn, p)
        assert max_rel_error(layer.grads()[name], num) < 1e-5, name
