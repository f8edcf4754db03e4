"""Stage 1: one LSTM autoencoder per metric, trained on eventless windows.

Each autoencoder sees a window as a sequence over time (one step per sample,
features = all stations in highway order), compresses it through a
128-then-64-cell encoder and reconstructs it through the symmetric decoder
(the 64-wide bottleneck is repeated along the time axis, then expanded by
64- and 128-cell layers with a shared per-step dense readout).  Squared
reconstruction errors from all metrics stack into the tensor consumed by
the localizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyTrainingSetError, ModelFormatError, TrainingDivergedError
from .events import EventRecord
from .nn.layers import Dense
from .nn.lstm import LstmLayer
from .nn.optim import AdamState, adam_step, clip_global_norm
from .nn.serialize import load_container, save_container
from .traces import Snapshot, TraceSet

MANIFEST_NAME = "manifest.json"


@dataclass
class AeTrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int = 10
    min_improvement: float = 1e-6
    val_fraction: float = 0.15
    clip_norm: float = 5.0
    encoder_cells: tuple[int, int] = (128, 64)
    max_windows: int | None = None


@dataclass
class AutoencoderModel:
    metric: str
    n_stations: int
    lookback: int
    enc1: LstmLayer
    enc2: LstmLayer
    dec1: LstmLayer
    dec2: LstmLayer
    readout: Dense
    training: dict = field(default_factory=dict)

    def layers(self):
        return {"enc1": self.enc1, "enc2": self.enc2,
                "dec1": self.dec1, "dec2": self.dec2, "readout": self.readout}

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self.layers().items():
            for pname, arr in layer.params().items():
                out[f"{lname}.{pname}"] = arr
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self.layers().items():
            for pname, arr in layer.grads().items():
                out[f"{lname}.{pname}"] = arr
        return out

    def zero_grad(self):
        for layer in self.layers().values():
            layer.zero_grad()

    # -- forward / backward --------------------------------------------------
    def reconstruct_batch(self, xs: np.ndarray) -> np.ndarray:
        """Reconstruct (B, L, N) windows."""
        b, t_len, n = xs.shape
        if n != self.n_stations or t_len != self.lookback:
            raise ValueError(
                f"window shape (L={t_len}, N={n}) does not match model "
                f"(L={self.lookback}, N={self.n_stations})"
            )
        h1 = self.enc1.forward(xs, return_sequences=True)
        z = self.enc2.forward(h1, return_sequences=False)
        rep = np.broadcast_to(z[:, None, :], (b, t_len, z.shape[1])).copy()
        d1 = self.dec1.forward(rep, return_sequences=True)
        d2 = self.dec2.forward(d1, return_sequences=True)
        flat = self.readout.forward(d2.reshape(b * t_len, -1))
        return flat.reshape(b, t_len, n)

    def backward(self, gout: np.ndarray) -> None:
        b, t_len, n = gout.shape
        gd2 = self.readout.backward(gout.reshape(b * t_len, n)).reshape(b, t_len, -1)
        gd1 = self.dec2.backward(gd2)
        grep = self.dec1.backward(gd1)
        gz = grep.sum(axis=1)  # bottleneck was repeated across time
        gh1 = self.enc2.backward(gz)
        self.enc1.backward(gh1)

    def _clear_caches(self):
        for layer in self.layers().values():
            layer._cache = None
        self.readout._x = None

    # -- persistence ----------------------------------------------------------
    def save(self, path: str | Path) -> None:
        meta = {
            "metric": self.metric,
            "n_stations": self.n_stations,
            "lookback": self.lookback,
            "cells": [self.enc1.n_cells, self.enc2.n_cells],
            "training": self.training,
        }
        save_container(path, "autoencoder", meta, self.params())

    @staticmethod
    def load(path: str | Path) -> "AutoencoderModel":
        manifest, arrays = load_container(path, expect_kind="autoencoder")
        meta = manifest["meta"]
        model = build_autoencoder(
            meta["metric"], meta["n_stations"], meta["lookback"],
            tuple(meta["cells"]), seed=0,
        )
        model.training = meta.get("training", {})
        for name, arr in model.params().items():
            if name not in arrays:
                raise ModelFormatError(f"missing parameter {name!r} in container")
            if arrays[name].shape != arr.shape:
                raise ModelFormatError(f"parameter {name!r} has wrong shape")
            np.copyto(arr, arrays[name])
        return model


def build_autoencoder(metric: str, n_stations: int, lookback: int,
                      cells: tuple[int, int] = (128, 64), seed: int = 0
                      ) -> AutoencoderModel:
    rng = np.random.default_rng(seed)
    c1, c2 = cells
    return AutoencoderModel(
        metric=metric,
        n_stations=n_stations,
        lookback=lookback,
        enc1=LstmLayer(n_stations, c1, rng),
        enc2=LstmLayer(c1, c2, rng),
        dec1=LstmLayer(c2, c2, rng),
        dec2=LstmLayer(c2, c1, rng),
        readout=Dense(c1, n_stations, rng),
    )


# ---------------------------------------------------------------------------
# training data selection
# ---------------------------------------------------------------------------


def eventless_window_ends(n_samples: int, events: Sequence[EventRecord],
                          lookback: int, start: int = 0,
                          stop: int | None = None) -> np.ndarray:
    """Window ends in [start, stop) whose span touches no event interval."""
    stop = n_samples if stop is None else stop
    ends = np.arange(max(lookback - 1, start), stop)
    ok = np.ones(len(ends), dtype=bool)
    for ev in events:
        # window [e-L+1, e] intersects [ev.start, ev.end)
        overlap = (ends >= ev.start) & (ends - lookback + 1 < ev.end)
        ok &= ~overlap
    return ends[ok]


def select_eventless_windows(traces: TraceSet, events: Sequence[EventRecord],
                             lookback: int, metric: str) -> list[Snapshot]:
    from .traces import window

    ends = eventless_window_ends(traces.n_samples, events, lookback)
    if len(ends) == 0:
        raise EmptyTrainingSetError("no eventless windows available")
    return [window(traces, metric, int(e), lookback) for e in ends]


def windows_array(traces: TraceSet, metric: str, ends: np.ndarray,
                  lookback: int) -> np.ndarray:
    """Stack windows as (W, L, N) training sequences."""
    m = traces.metric_index(metric)
    view = np.lib.stride_tricks.sliding_window_view(
        traces.values[m], lookback, axis=1
    )  # (N, T-L+1, L)
    sel = view[:, np.asarray(ends) - lookback + 1, :]  # (N, W, L)
    return np.ascontiguousarray(sel.transpose(1, 2, 0))


def snapshots_to_array(snapshots: Sequence[Snapshot]) -> np.ndarray:
    return np.stack([s.matrix.T for s in snapshots])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def train_autoencoder(metric: str, snapshots, config: AeTrainConfig | None = None,
                      n_stations: int | None = None) -> AutoencoderModel:
    """Fit the reconstruction model for one metric on eventless windows.

    ``snapshots`` is either a sequence of :class:`Snapshot` or a pre-stacked
    (W, L, N) array of normalized windows.
    """
    config = config or AeTrainConfig()
    if isinstance(snapshots, np.ndarray):
        xs = snapshots
    else:
        if len(snapshots) == 0:
            raise EmptyTrainingSetError("no training snapshots")
        xs = snapshots_to_array(snapshots)
    if xs.ndim != 3 or xs.shape[0] == 0:
        raise EmptyTrainingSetError("no training snapshots")
    n_windows, lookback, n_st = xs.shape
    if n_stations is not None and n_st != n_stations:
        raise ValueError("station count mismatch")

    rng = np.random.default_rng(config.seed)
    if config.max_windows is not None and n_windows > config.max_windows:
        # deterministic stride subsample keeps full-day coverage
        idx = np.linspace(0, n_windows - 1, config.max_windows).astype(int)
        xs = xs[idx]
        n_windows = len(xs)

    perm = rng.permutation(n_windows)
    n_val = int(n_windows * config.val_fraction)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise EmptyTrainingSetError("validation split swallowed all windows")
    x_train, x_val = xs[train_idx], xs[val_idx]

    model = build_autoencoder(metric, n_st, lookback,
                              config.encoder_cells, seed=config.seed)
    state = AdamState(model.params(), lr=config.lr)

    def epoch_pass(data: np.ndarray, order: np.ndarray) -> float:
        total, count = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            batch = data[order[lo : lo + config.batch_size]]
            pred = model.reconstruct_batch(batch)
            diff = pred - batch
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"autoencoder for {metric!r} diverged (non-finite loss)"
                )
            model.zero_grad()
            model.backward((2.0 / diff.size) * diff)
            grads = model.grads()
            clip_global_norm(grads, config.clip_norm)
            adam_step(model.params(), grads, state)
            total += loss * batch.shape[0]
            count += batch.shape[0]
        return total / max(count, 1)

    def eval_mse(data: np.ndarray) -> float:
        if len(data) == 0:
            return float("nan")
        total = 0.0
        for lo in range(0, len(data), 256):
            batch = data[lo : lo + 256]
            pred = model.reconstruct_batch(batch)
            total += float(np.sum((pred - batch) ** 2))
        return total / data.size

    history: list[float] = []
    val_history: list[float] = []
    best_val = np.inf
    best_params = None
    stale = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(x_train))
        train_mse = epoch_pass(x_train, order)
        history.append(train_mse)
        val_mse = eval_mse(x_val) if len(x_val) else train_mse
        val_history.append(val_mse)
        if val_mse < best_val - config.min_improvement:
            best_val = val_mse
            best_params = {k: v.copy() for k, v in model.params().items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_params is not None:
        for name, arr in model.params().items():
            np.copyto(arr, best_params[name])

    model._clear_caches()
    model.training = {
        "epochs_run": len(history),
        "final_train_mse": history[-1],
        "best_val_mse": None if np.isnan(best_val) else float(best_val),
        "loss_history": history,
        "val_history": val_history,
        "n_windows": int(n_windows),
        "seed": config.seed,
    }
    return model


# ---------------------------------------------------------------------------
# reconstruction errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorTensor:
    """Stack of per-metric squared reconstruction errors, (M, N, L)."""

    values: np.ndarray
    window_end: int

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("error tensor must be (metric, station, lookback)")
        if np.any(self.values < 0):
            raise ValueError("squared errors must be nonnegative")


def reconstruct(model: AutoencoderModel, snapshot: Snapshot) -> Snapshot:
    xs = snapshot.matrix.T[None]  # (1, L, N)
    out = model.reconstruct_batch(xs)[0]
    return Snapshot(metric=snapshot.metric, matrix=np.ascontiguousarray(out.T),
                    window_end=snapshot.window_end)


def error_matrix(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """Elementwise squared difference, (N, L)."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    d = x - x_hat
    return d * d


def build_error_tensor(matrices: Mapping[str, np.ndarray],
                       metric_order: Sequence[str],
                       window_end: int = -1) -> ErrorTensor:
    """Stack per-metric error matrices in the fixed metric order."""
    missing = [m for m in metric_order if m not in matrices]
    if missing:
        raise ValueError(f"missing error matrices for metrics {missing}")
    stack = np.stack([matrices[m] for m in metric_order])
    return ErrorTensor(values=stack, window_end=window_end)


def error_tensors_for_windows(models: Mapping[str, AutoencoderModel],
                              traces: TraceSet, ends: np.ndarray,
                              metric_order: Sequence[str], lookback: int,
                              batch_size: int = 256) -> np.ndarray:
    """Error tensors for many windows at once: (W, M, N, L)."""
    ends = np.asarray(ends, dtype=int)
    n_st = traces.n_stations
    out = np.empty((len(ends), len(metric_order), n_st, lookback))
    for mi, metric in enumerate(metric_order):
        model = models[metric]
        xs = windows_array(traces, metric, ends, lookback)  # (W, L, N)
        for lo in range(0, len(ends), batch_size):
            batch = xs[lo : lo + batch_size]
            err = (model.reconstruct_batch(batch) - batch) ** 2  # (B, L, N)
            out[lo : lo + batch_size, mi] = err.transpose(0, 2, 1)
    return out


def raw_tensors_for_windows(traces: TraceSet, ends: np.ndarray,
                            metric_order: Sequence[str], lookback: int
                            ) -> np.ndarray:
    """Raw normalized windows stacked like error tensors: (W, M, N, L)."""
    ends = np.asarray(ends, dtype=int)
    out = np.empty((len(ends), len(metric_order), traces.n_stations, lookback))
    for mi, metric in enumerate(metric_order):
        out[:, mi] = windows_array(traces, metric, ends, lookback).transpose(0, 2, 1)
    return out


# ---------------------------------------------------------------------------
# persistence of the per-metric model set
# ---------------------------------------------------------------------------


def save_autoencoder_set(directory: str | Path,
                         models: Mapping[str, AutoencoderModel],
                         metric_order: Sequence[str]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for metric in metric_order:
        fname = f"ae_{metric}.npz"
        models[metric].save(directory / fname)
        files[metric] = fname
    manifest = {"metric_order": list(metric_order), "files": files}
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))


def load_autoencoder_set(directory: str | Path
                         ) -> tuple[dict[str, AutoencoderModel], list[str]]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise ModelFormatError(f"{directory}: no {MANIFEST_NAME}")
    manifest = json.loads(manifest_path.read_text())
    order = manifest["metric_order"]
    models = {
        metric: AutoencoderModel.load(directory / manifest["files"][metric])
        for metric in order
    }
    return models, order
