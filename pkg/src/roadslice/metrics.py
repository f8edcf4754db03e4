"""Detector evaluation: ROC / precision-recall curves and their areas.

Thresholds sweep the distinct score values only, so tied scores move as one
group (the resulting area under the ROC curve equals the pairwise-comparison
probability with ties counted as half).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateLabelsError
from .events import EventRecord


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int
    station: int = -1
    window: int = -1


def _check(scores: np.ndarray, labels: np.ndarray, need_both: bool) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(int)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if labels.sum() == 0:
        raise DegenerateLabelsError("no positive samples")
    if need_both and labels.sum() == len(labels):
        raise DegenerateLabelsError("no negative samples")
    return scores, labels


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(FPR, TPR, thresholds); endpoints (0,0) and (1,1) included."""
    scores, labels = _check(scores, labels, need_both=True)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # group tied scores: cumulative counts at the last index of each group
    distinct = np.flatnonzero(np.diff(s)) if len(s) > 1 else np.array([], dtype=int)
    idx = np.concatenate([distinct, [len(s) - 1]])
    tp = np.cumsum(y)[idx]
    fp = np.cumsum(1 - y)[idx]
    p, n = y.sum(), (1 - y).sum()
    tpr = np.concatenate([[0.0], tp / p])
    fpr = np.concatenate([[0.0], fp / n])
    thresholds = np.concatenate([[np.inf], s[idx]])
    return fpr, tpr, thresholds


def auc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    """Trapezoid area under the ROC curve."""
    return float(np.trapezoid(tpr, fpr))


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(recall, precision, thresholds) at each distinct score threshold."""
    scores, labels = _check(scores, labels, need_both=False)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    distinct = np.flatnonzero(np.diff(s)) if len(s) > 1 else np.array([], dtype=int)
    idx = np.concatenate([distinct, [len(s) - 1]])
    tp = np.cumsum(y)[idx]
    flagged = idx + 1.0
    precision = tp / flagged
    recall = tp / y.sum()
    return recall, precision, s[idx]


def auprc(recall: np.ndarray, precision: np.ndarray) -> float:
    """Step-wise (right-continuous) area under the PR curve."""
    r = np.concatenate([[0.0], recall])
    return float(np.sum((r[1:] - r[:-1]) * precision))


def roc_auc(scores, labels) -> float:
    fpr, tpr, _ = roc_curve(scores, labels)
    return auc(fpr, tpr)


def pr_auc(scores, labels) -> float:
    recall, precision, _ = pr_curve(scores, labels)
    return auprc(recall, precision)


def pairwise_auc(scores, labels) -> float:
    """Brute-force AuC: fraction of (positive, negative) pairs ranked
    correctly, ties counted half.  Oracle for :func:`roc_auc`."""
    scores, labels = _check(scores, labels, need_both=True)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((wins + 0.5 * ties) / (len(pos) * len(neg)))


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def export_curves_csv(path: str | Path, xs: np.ndarray, ys: np.ndarray,
                      x_name: str, y_name: str) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([x_name, y_name])
        for x, y in zip(xs, ys):
            wr.writerow([f"{x:.10g}", f"{y:.10g}"])


def export_heatmap(probabilities: np.ndarray, window_ends: Sequence[int],
                   events: Sequence[EventRecord], path: str | Path,
                   markers_path: str | Path | None = None) -> None:
    """Detection heatmap (station, window, probability) plus truth markers.

    Probabilities are clipped to [0, 1] on write; the companion markers file
    holds one row per (event, active window at its source station).
    """
    probabilities = np.asarray(probabilities)
    window_ends = np.asarray(window_ends, dtype=int)
    if probabilities.shape[0] != len(window_ends):
        raise ValueError("one probability row per window required")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["station_id", "t", "probability"])
        clipped = np.clip(probabilities, 0.0, 1.0)
        for wi, t in enumerate(window_ends):
            for n in range(probabilities.shape[1]):
                wr.writerow([n, int(t), f"{clipped[wi, n]:.6g}"])
    if markers_path is None:
        markers_path = path.with_name(path.stem + "_truth" + path.suffix)
    with open(markers_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["station_id", "t", "severity"])
        in_range = set(int(t) for t in window_ends)
        for ev in events:
            for t in range(ev.start, ev.end):
                if t in in_range:
                    wr.writerow([ev.source_station, t, ev.severity.value])


def read_heatmap(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`export_heatmap`: (probability matrix, window ends)."""
    rows = list(csv.reader(open(path)))
    body = rows[1:]
    ts = sorted(set(int(r[1]) for r in body))
    ns = sorted(set(int(r[0]) for r in body))
    t_index = {t: i for i, t in enumerate(ts)}
    mat = np.zeros((len(ts), len(ns)))
    for n, t, p in body:
        mat[t_index[int(t)], int(n)] = float(p)
    return mat, np.array(ts)
