"""Central finite differences: the independent oracle for every analytic
gradient in this package."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


def finite_diff_grad(loss_fn: Callable[[], float], param: np.ndarray,
                     h: float = 1e-5) -> np.ndarray:
    """Numeric gradient of ``loss_fn()`` w.r.t. ``param``, perturbed in place."""
    if h <= 0:
        raise ValueError("h must be > 0")
    grad = np.zeros_like(param)
    flat = param.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = loss_fn()
        flat[i] = orig - h
        f_minus = loss_fn()
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError("loss became non-finite during finite differencing")
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def finite_diff_grads(loss_fn: Callable[[], float],
                      params: Mapping[str, np.ndarray],
                      h: float = 1e-5) -> dict[str, np.ndarray]:
    return {name: finite_diff_grad(loss_fn, p, h) for name, p in params.items()}


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray,
                  floor: float = 1e-5) -> float:
    """Largest elementwise relative error.

    Central differences at double precision bottom out near
    ``eps * |f| / h`` (~1e-11 for unit-scale losses), so components smaller
    than ``floor`` are compared against ``floor`` instead of their own
    magnitude; a genuinely wrong gradient still errs at the scale of the
    gradient itself and is caught.
    """
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
