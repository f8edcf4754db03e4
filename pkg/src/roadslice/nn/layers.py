"""Dense layer, activations and dropout with hand-derived gradients."""

from __future__ import annotations

import numpy as np


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def relu_vec(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid_vec(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def dense_forward(w: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """x @ w + b with shape checking; x is (B, in) or (in,)."""
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"input width {x.shape[-1]} != weight rows {w.shape[0]}")
    return x @ w + b


def dropout_apply(
    x: np.ndarray,
    rate: float,
    training: bool,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: scales by 1/(1-rate) at train time, identity otherwise."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


class Dense:
    """Fully connected layer; caches the last input for the backward pass."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.w = glorot_uniform(rng, (n_in, n_out), n_in, n_out)
        self.b = np.zeros(n_out)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return dense_forward(self.w, self.b, x)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        x = self._x
        self.gw += x.T @ gy
        self.gb += gy.sum(axis=0)
        return gy @ self.w.T

    def zero_grad(self):
        self.gw[...] = 0.0
        self.gb[...] = 0.0

    def params(self) -> dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}

    def grads(self) -> dict[str, np.ndarray]:
        return {"w": self.gw, "b": self.gb}
