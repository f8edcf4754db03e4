"""Pure-NumPy implementations of the hot kernels.

Same signatures as the compiled module ``roadslice.nn._kernels``; used as the
fallback when the extension is not built (or when forced via
``ROADSLICE_KERNELS=python``).  GEMM-shaped work stays in BLAS either way;
these kernels cover the pointwise and patch-shuffling parts of the inner
training loops.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_gates_forward(pre, c_prev):
    """Gate activations and state update from pre-activations.

    ``pre`` is (B, 4G) laid out as [input | forget | candidate | output];
    returns (h, c, gates) with ``gates`` holding the activated values in the
    same layout (cached for the backward pass).
    """
    B, four_g = pre.shape
    G = four_g // 4
    gates = np.empty_like(pre)
    i = gates[:, 0 * G : 1 * G] = _sigmoid(pre[:, 0 * G : 1 * G])
    f = gates[:, 1 * G : 2 * G] = _sigmoid(pre[:, 1 * G : 2 * G])
    g = gates[:, 2 * G : 3 * G] = np.tanh(pre[:, 2 * G : 3 * G])
    o = gates[:, 3 * G : 4 * G] = _sigmoid(pre[:, 3 * G : 4 * G])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, gates


def lstm_gates_backward(gh, gc, gates, c_prev, c):
    """Backward of :func:`lstm_gates_forward`.

    ``gh``/``gc`` are the gradients flowing into h and c at this step;
    returns (gpre, gc_prev).
    """
    B, G = gh.shape
    i = gates[:, 0 * G : 1 * G]
    f = gates[:, 1 * G : 2 * G]
    g = gates[:, 2 * G : 3 * G]
    o = gates[:, 3 * G : 4 * G]
    tanh_c = np.tanh(c)
    dc = gc + gh * o * (1.0 - tanh_c * tanh_c)
    gpre = np.empty((B, 4 * G), dtype=gh.dtype)
    gpre[:, 0 * G : 1 * G] = dc * g * i * (1.0 - i)
    gpre[:, 1 * G : 2 * G] = dc * c_prev * f * (1.0 - f)
    gpre[:, 2 * G : 3 * G] = dc * i * (1.0 - g * g)
    gpre[:, 3 * G : 4 * G] = gh * tanh_c * o * (1.0 - o)
    gc_prev = dc * f
    return gpre, gc_prev


def im2col3d(xp, kd, kh, kw):
    """Extract sliding (kd, kh, kw) patches of a padded (B, C, D, H, W) input.

    Returns (F, B, P): feature axis F ordered (channel, kd, kh, kw), position
    axis P = Do*Ho*Wo in row-major output order.  Feature-major layout lets
    the convolution run as one plain GEMM over (F, B*P) in both directions
    with no transpose copies of the big column matrix.
    """
    B, C, D, H, W = xp.shape
    do, ho, wo = D - kd + 1, H - kh + 1, W - kw + 1
    col = np.empty((C, kd, kh, kw, B, do, ho, wo), dtype=xp.dtype)
    xt = xp.transpose(1, 0, 2, 3, 4)
    for a in range(kd):
        for e in range(kh):
            for f in range(kw):
                col[:, a, e, f] = xt[:, :, a : a + do, e : e + ho, f : f + wo]
    return col.reshape(C * kd * kh * kw, B, do * ho * wo)


def col2im3d(gcol, c, dp, hp, wp, kd, kh, kw):
    """Scatter-add (F, B, P) column gradients back onto the padded input."""
    B = gcol.shape[1]
    do, ho, wo = dp - kd + 1, hp - kh + 1, wp - kw + 1
    g = gcol.reshape(c, kd, kh, kw, B, do, ho, wo)
    out = np.zeros((c, B, dp, hp, wp), dtype=gcol.dtype)
    for a in range(kd):
        for e in range(kh):
            for f in range(kw):
                out[:, :, a : a + do, e : e + ho, f : f + wo] += g[:, a, e, f]
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3, 4))


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """In-place Adam step on flat views; bc1/bc2 are the bias corrections."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
