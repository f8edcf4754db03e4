"""Minimal dense-tensor neural toolkit with hand-derived gradients.

Hot kernels (fused LSTM gate math, conv patch extraction, Adam updates) come
from a compiled extension when built, with a NumPy fallback selected at
import time; see :mod:`roadslice.nn.backend`.
"""

from .backend import backend_name
from .conv3d import Conv3dLayer, conv3d_forward
from .gradcheck import finite_diff_grad, finite_diff_grads, max_rel_error
from .layers import (
    Dense,
    dense_forward,
    dropout_apply,
    relu_vec,
    sigmoid_vec,
    softmax,
)
from .losses import bce_loss, mse_loss
from .lstm import LstmLayer, lstm_sequence_forward, lstm_step
from .optim import AdamState, adam_step, clip_global_norm
from .serialize import FORMAT_VERSION, load_container, save_container

__all__ = [
    "AdamState",
    "Conv3dLayer",
    "Dense",
    "FORMAT_VERSION",
    "LstmLayer",
    "adam_step",
    "backend_name",
    "bce_loss",
    "clip_global_norm",
    "conv3d_forward",
    "dense_forward",
    "dropout_apply",
    "finite_diff_grad",
    "finite_diff_grads",
    "load_container",
    "lstm_sequence_forward",
    "lstm_step",
    "max_rel_error",
    "mse_loss",
    "relu_vec",
    "save_container",
    "sigmoid_vec",
    "softmax",
]
