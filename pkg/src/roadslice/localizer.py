"""Stage 2: 3D-CNN + MLP mapping error tensors to per-station event
probabilities, plus the two reference detectors it is compared against.

The same network class backs both the two-stage detector (input: stacked
reconstruction errors) and the direct-CNN baseline (input: stacked raw
windows).  The threshold-on-max-error detector needs no training at all.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateLabelsError, ModelFormatError, TrainingDivergedError
from .events import EventRecord
from .nn.conv3d import Conv3dLayer
from .nn.layers import Dense, dropout_apply, sigmoid_vec
from .nn.optim import AdamState, adam_step
from .nn.serialize import load_container, save_container


@dataclass(frozen=True)
class LocArchitecture:
    conv_filters: tuple[int, int] = (32, 16)
    kernel: tuple[int, int, int] = (3, 3, 3)
    dense: tuple[int, int] = (512, 256)
    dropout: float = 0.2
    # stations and time get symmetric zero padding so edge stations stay
    # visible; the metric axis is reduced by valid convolution
    pad_metric: int = 0


@dataclass
class LocTrainConfig:
    epochs: int = 150
    batch_size: int = 32
    lr: float = 1e-4
    seed: int = 0
    pos_neg_ratio: float = 0.25  # oversample positives up to 1:4 pos:neg
    # random station-axis rolls applied per epoch; teaches the dense head
    # that event patterns translate along the highway instead of memorizing
    # which stations had training events (0 disables)
    shift_augment: int = 8
    store_examples: bool = True
    arch: LocArchitecture = field(default_factory=LocArchitecture)


class LocalizerModel:
    def __init__(self, input_shape: tuple[int, int, int],
                 arch: LocArchitecture | None = None, seed: int = 0,
                 kind: str = "two_stage"):
        arch = arch or LocArchitecture()
        rng = np.random.default_rng(seed)
        m, n, l = input_shape
        f1, f2 = arch.conv_filters
        pad = (arch.pad_metric, 1, 1)
        self.kind = kind
        self.arch = arch
        self.input_shape = input_shape
        self.n_stations = n
        self.conv1 = Conv3dLayer(1, f1, arch.kernel, padding=pad, rng=rng)
        self.conv2 = Conv3dLayer(f1, f2, arch.kernel, padding=pad, rng=rng)
        s1 = self.conv1.output_shape((m, n, l))
        s2 = self.conv2.output_shape(s1)
        flat = f2 * int(np.prod(s2))
        d1, d2 = arch.dense
        self.fc1 = Dense(flat, d1, rng)
        self.fc2 = Dense(d1, d2, rng)
        self.fc3 = Dense(d2, n, rng)
        self.training_meta: dict = {}
        self._tensors: np.ndarray | None = None  # replay buffer for retraining
        self._labels: np.ndarray | None = None
        self._cache = None

    # -- forward / backward ---------------------------------------------------
    def forward_logits(self, x: np.ndarray, training: bool = False,
                       rng: np.random.Generator | None = None) -> np.ndarray:
        if x.ndim != 4:
            raise ValueError("input must be (batch, metric, station, lookback)")
        if x.shape[1:] != self.input_shape:
            raise ValueError(
                f"input shape {x.shape[1:]} does not match model {self.input_shape}"
            )
        bsz = x.shape[0]
        a1 = self.conv1.forward(x[:, None], training)
        a2 = self.conv2.forward(a1, training)
        flat = a2.reshape(bsz, -1)
        z1 = self.fc1.forward(flat)
        r1 = np.maximum(z1, 0.0)
        d1, mask1 = dropout_apply(r1, self.arch.dropout, training, rng)
        z2 = self.fc2.forward(d1)
        r2 = np.maximum(z2, 0.0)
        d2, mask2 = dropout_apply(r2, self.arch.dropout, training, rng)
        logits = self.fc3.forward(d2)
        self._cache = (a2.shape, z1, mask1, z2, mask2)
        return logits

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Per-station event probabilities for (B, M, N, L) inputs."""
        return sigmoid_vec(self.forward_logits(x, training, rng))

    def backward(self, glogits: np.ndarray) -> None:
        a2_shape, z1, mask1, z2, mask2 = self._cache
        g = self.fc3.backward(glogits)
        if mask2 is not None:
            g = g * mask2
        g = g * (z2 > 0)
        g = self.fc2.backward(g)
        if mask1 is not None:
            g = g * mask1
        g = g * (z1 > 0)
        g = self.fc1.backward(g)
        g = self.conv2.backward(g.reshape(a2_shape))
        self.conv1.backward(g, need_input_grad=False)  # first layer

    def layers(self):
        return {"conv1": self.conv1, "conv2": self.conv2,
                "fc1": self.fc1, "fc2": self.fc2, "fc3": self.fc3}

    def params(self) -> dict[str, np.ndarray]:
        return {f"{ln}.{pn}": arr for ln, layer in self.layers().items()
                for pn, arr in layer.params().items()}

    def grads(self) -> dict[str, np.ndarray]:
        return {f"{ln}.{pn}": arr for ln, layer in self.layers().items()
                for pn, arr in layer.grads().items()}

    def zero_grad(self):
        for layer in self.layers().values():
            layer.zero_grad()

    def _clear_caches(self):
        for layer in self.layers().values():
            layer._cache = None
        for fc in (self.fc1, self.fc2, self.fc3):
            fc._x = None
        self._cache = None

    def clone(self) -> "LocalizerModel":
        self._clear_caches()
        return copy.deepcopy(self)

    # -- persistence ------------------------------------------------------------
    def save(self, path: str | Path) -> None:
        meta = {
            "kind": self.kind,
            "input_shape": list(self.input_shape),
            "arch": {
                "conv_filters": list(self.arch.conv_filters),
                "kernel": list(self.arch.kernel),
                "dense": list(self.arch.dense),
                "dropout": self.arch.dropout,
                "pad_metric": self.arch.pad_metric,
            },
            "training": self.training_meta,
        }
        arrays = dict(self.params())
        if self._tensors is not None:
            arrays["buffer.tensors"] = self._tensors
            arrays["buffer.labels"] = self._labels
        save_container(path, "localizer", meta, arrays)

    @staticmethod
    def load(path: str | Path) -> "LocalizerModel":
        manifest, arrays = load_container(path, expect_kind="localizer")
        meta = manifest["meta"]
        a = meta["arch"]
        arch = LocArchitecture(
            conv_filters=tuple(a["conv_filters"]), kernel=tuple(a["kernel"]),
            dense=tuple(a["dense"]), dropout=a["dropout"],
            pad_metric=a["pad_metric"],
        )
        model = LocalizerModel(tuple(meta["input_shape"]), arch,
                               kind=meta.get("kind", "two_stage"))
        model.training_meta = meta.get("training", {})
        for name, arr in model.params().items():
            if name not in arrays or arrays[name].shape != arr.shape:
                raise ModelFormatError(f"bad or missing parameter {name!r}")
            np.copyto(arr, arrays[name])
        if "buffer.tensors" in arrays:
            model._tensors = arrays["buffer.tensors"]
            model._labels = arrays["buffer.labels"]
        return model


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def labels_for_windows(events: Sequence[EventRecord], ends: np.ndarray,
                       n_stations: int) -> np.ndarray:
    """Multi-label targets: 1 at an event's source station while it is active.

    Only the source is labeled; the network has to learn that neighbouring
    deviations are propagation, not extra events.
    """
    ends = np.asarray(ends, dtype=int)
    y = np.zeros((len(ends), n_stations))
    for ev in events:
        active = (ends >= ev.start) & (ends < ev.end)
        y[active, ev.source_station] = 1.0
    return y


def _bce_from_logits(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Numerically stable mean BCE and its gradient w.r.t. the logits."""
    softplus = np.logaddexp(0.0, -np.abs(logits))
    loss = float(np.mean(np.maximum(logits, 0.0) - logits * y + softplus))
    probs = sigmoid_vec(logits)
    return loss, (probs - y) / y.size


def _roll_stations(x: np.ndarray, y: np.ndarray, max_shift: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Circularly shift each example (tensor + label) along the station axis."""
    shifts = rng.integers(-max_shift, max_shift + 1, size=len(x))
    x = np.array(x)
    y = np.array(y)
    for k in np.unique(shifts):
        if k == 0:
            continue
        sel = shifts == k
        x[sel] = np.roll(x[sel], int(k), axis=2)
        y[sel] = np.roll(y[sel], int(k), axis=1)
    return x, y


def _oversampled_indices(labels: np.ndarray, ratio: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Replicate positive windows until pos:neg reaches ``ratio``."""
    pos = np.flatnonzero(labels.any(axis=1))
    neg = np.flatnonzero(~labels.any(axis=1))
    if len(pos) == 0:
        raise DegenerateLabelsError("training data contains no positive windows")
    target_pos = int(np.ceil(len(neg) * ratio))
    if target_pos > len(pos):
        reps = int(np.ceil(target_pos / len(pos)))
        pos = np.tile(pos, reps)[:target_pos]
    idx = np.concatenate([pos, neg])
    rng.shuffle(idx)
    return idx


def train_localizer(tensors: np.ndarray, labels: np.ndarray,
                    config: LocTrainConfig | None = None,
                    kind: str = "two_stage",
                    model: LocalizerModel | None = None) -> LocalizerModel:
    """Fit the localization network on (W, M, N, L) inputs.

    Pass ``model`` to continue optimizing existing weights (used by
    :func:`retrain_incremental`).
    """
    config = config or LocTrainConfig()
    if tensors.ndim != 4 or len(tensors) != len(labels):
        raise ValueError("need (W, M, N, L) tensors aligned with (W, N) labels")
    if len(tensors) == 0:
        raise DegenerateLabelsError("empty training set")
    if not labels.any():
        raise DegenerateLabelsError("all labels negative; nothing to localize")

    rng = np.random.default_rng(config.seed)
    if model is None:
        model = LocalizerModel(tensors.shape[1:], config.arch,
                               seed=config.seed, kind=kind)
    state = AdamState(model.params(), lr=config.lr)

    history: list[float] = []
    for _ in range(config.epochs):
        idx = _oversampled_indices(labels, config.pos_neg_ratio, rng)
        total, count = 0.0, 0
        for lo in range(0, len(idx), config.batch_size):
            sel = idx[lo : lo + config.batch_size]
            x, y = tensors[sel], labels[sel]
            if config.shift_augment > 0:
                x, y = _roll_stations(x, y, config.shift_augment, rng)
            logits = model.forward_logits(x, training=True, rng=rng)
            loss, glog = _bce_from_logits(logits, y)
            if not np.isfinite(loss):
                raise TrainingDivergedError("localizer training diverged")
            model.zero_grad()
            model.backward(glog)
            adam_step(model.params(), model.grads(), state)
            total += loss * len(sel)
            count += len(sel)
        history.append(total / count)

    model._clear_caches()
    model.training_meta = {
        "epochs_run": len(history),
        "loss_history": history,
        "final_loss": history[-1],
        "seed": config.seed,
        "kind": kind,
    }
    if config.store_examples:
        model._tensors = np.array(tensors)
        model._labels = np.array(labels)
    return model


def localize(model: LocalizerModel, tensor: np.ndarray) -> np.ndarray:
    """Inference on a single (M, N, L) tensor; dropout disabled."""
    if tensor.ndim != 3:
        raise ValueError("expected a single (M, N, L) tensor")
    return model.forward(tensor[None], training=False)[0]


def localize_batch(model: LocalizerModel, tensors: np.ndarray,
                   batch_size: int = 64) -> np.ndarray:
    out = np.empty((len(tensors), model.n_stations))
    for lo in range(0, len(tensors), batch_size):
        out[lo : lo + batch_size] = model.forward(
            tensors[lo : lo + batch_size], training=False
        )
    return out


def retrain_incremental(model: LocalizerModel, new_tensors: np.ndarray,
                        new_labels: np.ndarray,
                        config: LocTrainConfig | None = None) -> LocalizerModel:
    """Learn-as-you-go: continue from current weights on old + new examples."""
    if len(new_tensors) == 0:
        return model.clone()
    if model._tensors is not None:
        tensors = np.concatenate([model._tensors, new_tensors])
        labels = np.concatenate([model._labels, new_labels])
    else:
        tensors, labels = new_tensors, new_labels
    fresh = model.clone()
    return train_localizer(tensors, labels, config, kind=model.kind, model=fresh)


# ---------------------------------------------------------------------------
# reference detectors
# ---------------------------------------------------------------------------


def ae_station_scores(tensors: np.ndarray) -> np.ndarray:
    """Per-station anomaly score: max squared error over metrics and lookback."""
    return tensors.max(axis=(-3, -1))


def baseline_ae_threshold(tensors: np.ndarray, tau: float) -> np.ndarray:
    """Station flagged iff its max reconstruction error exceeds ``tau``."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    return ae_station_scores(tensors) > tau


def baseline_cnn_direct(raw_stacks: np.ndarray, labels: np.ndarray,
                        config: LocTrainConfig | None = None) -> LocalizerModel:
    """Same architecture trained end-to-end on raw normalized windows."""
    return train_localizer(raw_stacks, labels, config, kind="direct")
