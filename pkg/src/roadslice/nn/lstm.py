"""LSTM layer with hand-derived backpropagation through time.

Gate layout follows the fused kernel convention: the 4G pre-activation
columns are [input | forget | candidate | output].  The input/forget/output
gates squash through a sigmoid and the candidate through tanh; the cell
state mixes the previous cell (forget gate) with the candidate (input gate)
and the hidden output is the output gate times tanh(cell).
"""

from __future__ import annotations

import numpy as np

from .backend import kernels

RECURRENT_INIT_LIMIT = 0.08
FORGET_BIAS = 1.0


class LstmLayer:
    def __init__(self, n_in: int, n_cells: int, rng: np.random.Generator):
        g = n_cells
        self.n_in = n_in
        self.n_cells = g
        self.wx = rng.uniform(-RECURRENT_INIT_LIMIT, RECURRENT_INIT_LIMIT, (n_in, 4 * g))
        self.wh = rng.uniform(-RECURRENT_INIT_LIMIT, RECURRENT_INIT_LIMIT, (g, 4 * g))
        self.b = np.zeros(4 * g)
        self.b[g : 2 * g] = FORGET_BIAS  # keep early memory open
        self.gwx = np.zeros_like(self.wx)
        self.gwh = np.zeros_like(self.wh)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    # -- single step -------------------------------------------------------
    def step(self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
        """One recurrence step on a (B, n_in) batch; returns (h, c)."""
        if x.shape[-1] != self.n_in:
            raise ValueError(f"input width {x.shape[-1]} != layer n_in {self.n_in}")
        if h_prev.shape[-1] != self.n_cells or c_prev.shape[-1] != self.n_cells:
            raise ValueError("state width does not match layer cells")
        pre = x @ self.wx + h_prev @ self.wh + self.b
        h, c, _ = kernels.lstm_gates_forward(pre, np.ascontiguousarray(c_prev))
        return h, c

    # -- full sequence ------------------------------------------------------
    def forward(self, xs: np.ndarray, return_sequences: bool = True) -> np.ndarray:
        """Run over (B, T, n_in); returns (B, T, G) or the last hidden (B, G)."""
        if xs.ndim != 3:
            raise ValueError("sequence input must be (batch, time, features)")
        if xs.shape[2] != self.n_in:
            raise ValueError(f"input width {xs.shape[2]} != layer n_in {self.n_in}")
        b, t_len, _ = xs.shape
        if t_len == 0:
            raise ValueError("empty sequence")
        g = self.n_cells
        hs = np.empty((b, t_len, g))
        cs = np.empty((b, t_len, g))
        gates = np.empty((b, t_len, 4 * g))
        h = np.zeros((b, g))
        c = np.zeros((b, g))
        c_prevs = np.empty((b, t_len, g))
        h_prevs = np.empty((b, t_len, g))
        # the input contribution has no recurrence; one big GEMM beats T small ones
        pre_x = (xs.reshape(b * t_len, self.n_in) @ self.wx).reshape(b, t_len, 4 * g)
        pre_x += self.b
        for t in range(t_len):
            h_prevs[:, t] = h
            c_prevs[:, t] = c
            pre = pre_x[:, t] + h @ self.wh
            h, c, gate = kernels.lstm_gates_forward(pre, np.ascontiguousarray(c_prevs[:, t]))
            hs[:, t] = h
            cs[:, t] = c
            gates[:, t] = gate
        self._cache = (xs, h_prevs, c_prevs, cs, gates, return_sequences)
        return hs if return_sequences else hs[:, -1]

    def backward(self, gout: np.ndarray) -> np.ndarray:
        """Backpropagate through time; ``gout`` matches the forward output."""
        xs, h_prevs, c_prevs, cs, gates, return_sequences = self._cache
        b, t_len, _ = xs.shape
        g = self.n_cells
        if return_sequences:
            gh_seq = gout
        else:
            gh_seq = np.zeros((b, t_len, g))
            gh_seq[:, -1] = gout
        gpre_all = np.empty((b, t_len, 4 * g))
        gh_next = np.zeros((b, g))
        gc_next = np.zeros((b, g))
        for t in range(t_len - 1, -1, -1):
            gh_total = np.ascontiguousarray(gh_seq[:, t] + gh_next)
            gpre, gc_next = kernels.lstm_gates_backward(
                gh_total, gc_next,
                np.ascontiguousarray(gates[:, t]),
                np.ascontiguousarray(c_prevs[:, t]),
                np.ascontiguousarray(cs[:, t]),
            )
            gpre_all[:, t] = gpre
            gh_next = gpre @ self.wh.T
        flat_pre = gpre_all.reshape(b * t_len, 4 * g)
        self.gwx += xs.reshape(b * t_len, self.n_in).T @ flat_pre
        self.gwh += h_prevs.reshape(b * t_len, g).T @ flat_pre
        self.gb += flat_pre.sum(axis=0)
        gxs = (flat_pre @ self.wx.T).reshape(b, t_len, self.n_in)
        return gxs

    def zero_grad(self):
        self.gwx[...] = 0.0
        self.gwh[...] = 0.0
        self.gb[...] = 0.0

    def params(self) -> dict[str, np.ndarray]:
        return {"wx": self.wx, "wh": self.wh, "b": self.b}

    def grads(self) -> dict[str, np.ndarray]:
        return {"wx": self.gwx, "wh": self.gwh, "b": self.gb}


def lstm_step(layer: LstmLayer, x: np.ndarray, h_prev: np.ndarray,
              c_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-step convenience accepting 1-D vectors."""
    squeeze = x.ndim == 1
    if squeeze:
        x, h_prev, c_prev = x[None, :], h_prev[None, :], c_prev[None, :]
    h, c = layer.step(x, h_prev, c_prev)
    return (h[0], c[0]) if squeeze else (h, c)


def lstm_sequence_forward(layers: list[LstmLayer], xs: np.ndarray,
                          return_sequences: bool = True) -> np.ndarray:
    """Thread a sequence through stacked layers, left to right in time.

    ``return_sequences`` applies to the last layer only (return-last mode is
    the encoder bottleneck; return-all is the decoder mode).
    """
    if not layers:
        raise ValueError("need at least one layer")
    out = xs
    for layer in layers[:-1]:
        out = layer.forward(out, return_sequences=True)
    return layers[-1].forward(out, return_sequences=return_sequences)
