"""Training losses with analytic gradients."""

from __future__ import annotations

import numpy as np

BCE_EPS = 1e-12


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements and its gradient w.r.t. pred."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad


def bce_loss(prob: np.ndarray, label: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over all outputs; gradient w.r.t. prob."""
    if prob.shape != label.shape:
        raise ValueError(f"shape mismatch {prob.shape} vs {label.shape}")
    p = np.clip(prob, BCE_EPS, 1.0 - BCE_EPS)
    loss = float(-np.mean(label * np.log(p) + (1.0 - label) * np.log(1.0 - p)))
    grad = (p - label) / (p * (1.0 - p)) / p.size
    return loss, grad
