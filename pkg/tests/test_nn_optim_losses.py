import math

import numpy as np
import pytest

from roadslice.nn import (
    AdamState,
    adam_step,
    bce_loss,
    clip_global_norm,
    finite_diff_grad,
    mse_loss,
)


class TestLosses:
    def test_mse_zero_on_equal(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        loss, grad = mse_loss(x, x.copy())
        assert loss == 0.0 and np.all(grad == 0.0)

    def test_mse_known_value(self):
        loss, _ = mse_loss(np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros((2, 2)))
        assert loss == pytest.approx(7.5)

    def test_bce_half_on_positive(self):
        loss, _ = bce_loss(np.array([0.5]), np.array([1.0]))
        assert loss == pytest.approx(math.log(2.0), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            bce_loss(np.ones(3) * 0.5, np.ones(4))

    @pytest.mark.parametrize("seed", range(10))
    def test_loss_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        pred = rng.normal(size=(3, 4))
        target = rng.normal(size=(3, 4))

        g = mse_loss(pred, target)[1]
        num = finite_diff_grad(lambda: mse_loss(pred, target)[0], pred)
        assert np.allclose(g, num, rtol=1e-6, atol=1e-9)

        prob = rng.uniform(0.05, 0.95, size=(3, 4))
        label = rng.integers(0, 2, size=(3, 4)).astype(float)
        g = bce_loss(prob, label)[1]
        num = finite_diff_grad(lambda: bce_loss(prob, label)[0], prob, h=1e-6)
        assert np.allclose(g, num, rtol=1e-4, atol=1e-8)


class TestAdam:
    def test_first_step_magnitude(self):
        p = {"w": np.array([1.0])}
        state = AdamState(p, lr=1e-4)
        adam_step(p, {"w": np.array([0.5])}, state)
        # bias-corrected first step moves by ~lr in the gradient direction
        assert p["w"][0] == pytest.approx(1.0 - 1e-4, abs=1e-8)

    def test_zero_gradient_no_move(self):
        p = {"w": np.array([1.0, -2.0])}
        state = AdamState(p, lr=0.1)
        adam_step(p, {"w": np.zeros(2)}, state)
        assert np.allclose(p["w"], [1.0, -2.0])

    def test_two_steps_reduce_quadratic_loss(self):
        p = {"x": np.array([3.0])}
        state = AdamState(p, lr=0.5)
        losses = []
        for _ in range(2):
            losses.append(p["x"][0] ** 2)
            adam_step(p, {"x": 2 * p["x"]}, state)
        assert p["x"][0] ** 2 < losses[0]

    def test_determinism(self):
        def run():
            p = {"w": np.linspace(-1, 1, 5)}
            state = AdamState(p, lr=0.01)
            rng = np.random.default_rng(0)
            for _ in range(10):
                adam_step(p, {"w": rng.normal(size=5)}, state)
            return p["w"]

        assert np.array_equal(run(), run())

    def test_non_finite_gradient_names_parameter(self):
        p = {"bad_param": np.ones(2)}
        state = AdamState(p)
        with pytest.raises(FloatingPointError, match="bad_param"):
            adam_step(p, {"bad_param": np.array([1.0, np.nan])}, state)


class TestClipping:
    def test_scales_when_above(self):
        grads = {"a": np.array([3.0, 4.0])}
        norm = clip_global_norm(grads, 1.0)
        assert norm == pytest.approx(5.0)
        assert np.linalg.norm(grads["a"]) == pytest.approx(1.0)

    def test_untouched_when_below(self):
        grads = {"a": np.array([0.3, 0.4])}
        clip_global_norm(grads, 1.0)
        assert np.allclose(grads["a"], [0.3, 0.4])


class TestFiniteDifferences:
    def test_square_at_three(self):
        x = np.array([3.0])
        g = finite_diff_grad(lambda: float(x[0] ** 2), x)
        assert g[0] == pytest.approx(6.0, abs=1e-8)

    def test_constant_function(self):
        x = np.ones(4)
        g = finite_diff_grad(lambda: 42.0, x)
        assert np.all(g == 0.0)

    def test_bad_h(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda: 0.0, np.ones(1), h=0.0)
