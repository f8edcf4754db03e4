"""3-D convolution layer (valid cross-correlation, optional zero padding)."""

from __future__ import annotations

import numpy as np

from .backend import kernels
from .layers import glorot_uniform


class Conv3dLayer:
    """Cross-correlates (B, Cin, D, H, W) inputs with (3,3,3)-style kernels.

    Output spatial dims are input - kernel + 1 per axis after the configured
    symmetric zero padding; activation is ReLU or identity.
    """

    def __init__(self, in_channels: int, n_filters: int,
                 kernel: tuple[int, int, int] = (3, 3, 3),
                 padding: tuple[int, int, int] = (0, 0, 0),
                 activation: str | None = "relu",
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        if activation not in (None, "relu"):
            raise ValueError(f"unsupported activation {activation!r}")
        kd, kh, kw = kernel
        fan_in = in_channels * kd * kh * kw
        fan_out = n_filters * kd * kh * kw
        self.in_channels = in_channels
        self.n_filters = n_filters
        self.kernel = kernel
        self.padding = padding
        self.activation = activation
        self.k = glorot_uniform(rng, (n_filters, in_channels, kd, kh, kw), fan_in, fan_out)
        self.b = np.zeros(n_filters)
        self.gk = np.zeros_like(self.k)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def output_shape(self, in_shape: tuple[int, int, int]) -> tuple[int, int, int]:
        kd, kh, kw = self.kernel
        pd, ph, pw = self.padding
        d = in_shape[0] + 2 * pd - kd + 1
        h = in_shape[1] + 2 * ph - kh + 1
        w = in_shape[2] + 2 * pw - kw + 1
        if d < 1 or h < 1 or w < 1:
            raise ValueError(
                f"input {in_shape} too small for kernel {self.kernel} with padding {self.padding}"
            )
        return d, h, w

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 5:
            raise ValueError("conv3d input must be (batch, channels, D, H, W)")
        if x.shape[1] != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {x.shape[1]}")
        bsz = x.shape[0]
        do, ho, wo = self.output_shape(x.shape[2:])
        kd, kh, kw = self.kernel
        pd, ph, pw = self.padding
        if self.padding == (0, 0, 0):
            xp = np.ascontiguousarray(x)
        else:
            xp = np.pad(x, ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw)))
        col = kernels.im2col3d(xp, kd, kh, kw)  # (F, B, P)
        n_feat = col.shape[0]
        kmat = self.k.reshape(self.n_filters, n_feat)  # (Co, F)
        pre = (kmat @ col.reshape(n_feat, -1)).reshape(self.n_filters, bsz, -1)
        pre += self.b[:, None, None]
        y = np.ascontiguousarray(pre.transpose(1, 0, 2)).reshape(
            bsz, self.n_filters, do, ho, wo)
        if self.activation == "relu":
            y = np.maximum(y, 0.0)
        self._cache = (col, xp.shape, y if self.activation else None)
        return y

    def backward(self, gy: np.ndarray, need_input_grad: bool = True
                 ) -> np.ndarray | None:
        col, xp_shape, act = self._cache
        bsz, co = gy.shape[0], self.n_filters
        kd, kh, kw = self.kernel
        pd, ph, pw = self.padding
        if self.activation == "relu":
            gy = gy * (act > 0)
        n_feat = col.shape[0]
        colf = col.reshape(n_feat, -1)  # (F, B*P)
        gmat = np.ascontiguousarray(
            gy.reshape(bsz, co, -1).transpose(1, 0, 2)).reshape(co, -1)
        kmat = self.k.reshape(co, n_feat)
        self.gk += (gmat @ colf.T).reshape(self.k.shape)
        self.gb += gmat.sum(axis=1)
        if not need_input_grad:
            return None
        gcol = (kmat.T @ gmat).reshape(col.shape)  # (F, B, P)
        gxp = kernels.col2im3d(
            gcol, self.in_channels,
            xp_shape[2], xp_shape[3], xp_shape[4], kd, kh, kw,
        )
        d, h, w = xp_shape[2] - 2 * pd, xp_shape[3] - 2 * ph, xp_shape[4] - 2 * pw
        return gxp[:, :, pd : pd + d, ph : ph + h, pw : pw + w]

    def zero_grad(self):
        self.gk[...] = 0.0
        self.gb[...] = 0.0

    def params(self) -> dict[str, np.ndarray]:
        return {"k": self.k, "b": self.b}

    def grads(self) -> dict[str, np.ndarray]:
        return {"k": self.gk, "b": self.gb}


def conv3d_forward(layer: Conv3dLayer, x: np.ndarray) -> np.ndarray:
    """Convenience wrapper accepting a single unbatched volume.

    3-D input (D, H, W) is treated as one single-channel example; 4-D input
    as one multi-channel example.
    """
    if x.ndim == 3:
        y = layer.forward(x[None, None])
        return y[0, :] if layer.n_filters > 1 else y[0, 0]
    if x.ndim == 4:
        return layer.forward(x[None])[0]
    return layer.forward(x)
