import numpy as np
import pytest

from roadslice.nn import Conv3dLayer, conv3d_forward, finite_diff_grad, max_rel_error, mse_loss


def test_all_ones_valid_convolution():
    layer = Conv3dLayer(1, 1, activation=None, rng=np.random.default_rng(0))
    layer.k[...] = 1.0
    layer.b[...] = 0.0
    y = layer.forward(np.ones((1, 1, 4, 4, 4)))
    assert y.shape == (1, 1, 2, 2, 2)
    assert np.allclose(y, 27.0)


def test_relu_clamps_negative_bias():
    layer = Conv3dLayer(1, 2, activation="relu", rng=np.random.default_rng(0))
    layer.k[...] = 0.0
    layer.b[...] = -1.0
    y = layer.forward(np.random.default_rng(1).normal(size=(2, 1, 5, 5, 5)))
    assert np.all(y == 0.0)


def test_valid_output_shape_randomized():
    rng = np.random.default_rng(7)
    for _ in range(20):
        d, h, w = rng.integers(3, 9, size=3)
        layer = Conv3dLayer(1, 2, activation=None, rng=rng)
        y = layer.forward(rng.normal(size=(1, 1, d, h, w)))
        assert y.shape == (1, 2, d - 2, h - 2, w - 2)


def test_padding_preserves_padded_axes():
    rng = np.random.default_rng(0)
    layer = Conv3dLayer(1, 3, padding=(0, 1, 1), rng=rng)
    y = layer.forward(rng.normal(size=(2, 1, 5, 6, 7)))
    assert y.shape == (2, 3, 3, 6, 7)


def test_undersized_input_rejected():
    layer = Conv3dLayer(1, 1, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        layer.forward(np.ones((1, 1, 2, 4, 4)))


def test_wrong_channel_count_rejected():
    layer = Conv3dLayer(2, 1, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        layer.forward(np.ones((1, 1, 4, 4, 4)))


def test_unbatched_convenience_wrapper():
    layer = Conv3dLayer(1, 1, activation=None, rng=np.random.default_rng(0))
    layer.k[...] = 1.0
    y = conv3d_forward(layer, np.ones((4, 4, 4)))
    assert y.shape == (2, 2, 2)
    assert np.allclose(y, 27.0)


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(300 + seed)
    layer = Conv3dLayer(1, 2, padding=(0, 1, 0), activation="relu", rng=rng)
    x = rng.normal(size=(2, 1, 5, 5, 5))
    y = layer.forward(x)
    target = rng.normal(size=y.shape)

    def loss_fn():
        return mse_loss(layer.forward(x), target)[0]

    _, g = mse_loss(y, target)
    layer.zero_grad()
    gx = layer.backward(g)
    for name, p in layer.params().items():
        num = finite_diff_grad(loss_fn, p)
        assert max_rel_error(layer.grads()[name], num) < 1e-5, name
    num_x = finite_diff_grad(loss_fn, x)
    assert max_rel_error(gx, num_x) < 1e-5


@pytest.mark.parametrize("seed", range(5))
def test_multichannel_gradients(seed):
    rng = np.random.default_rng(900 + seed)
    layer = Conv3dLayer(3, 2, activation=None, rng=rng)
    x = rng.normal(size=(1, 3, 4, 4, 4))
    y = layer.forward(x)
    target = rng.normal(size=y.shape)

    def loss_fn():
        return mse_loss(layer.forward(x), target)[0]

    _, g = mse_loss(y, target)
    layer.zero_grad()
    layer.backward(g)
    for name, p in layer.params().items():
        num = finite_diff_grad(loss_fn, p)
        assert max_rel_error(layer.grads()[name], num) < 1e-5, name
