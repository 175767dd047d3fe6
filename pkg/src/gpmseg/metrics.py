"""Benchmark metrics: voxel-weighted per-class and global accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    per_class_accuracy: np.ndarray  # NaN for classes absent from the truth
    average_per_class: float
    global_accuracy: float
    confusion: np.ndarray  # rows = truth, cols = prediction, voxel counts

    def to_dict(self, names=None) -> dict:
        names = names or [str(k) for k in range(self.confusion.shape[0])]
        per = {n: (None if np.isnan(a) else float(a)) for n, a in zip(names, self.per_class_accuracy)}
        return {
            "per_class_accuracy": per,
            "average_per_class": float(self.average_per_class),
            "global_accuracy": float(self.global_accuracy),
            "confusion": self.confusion.astype(np.int64).tolist(),
            "classes": list(names),
        }


def confusion_matrix(pred, truth, weights, n_labels: int) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction has {pred.size} segments, truth has {truth.size}")
    w = np.asarray(weights, dtype=np.int64)
    return np.bincount(truth * n_labels + pred, weights=w, minlength=n_labels * n_labels).reshape(n_labels, n_labels).astype(np.int64)


def evaluate(pred, truth, weights, n_labels: int) -> EvalReport:
    """Per-class accuracy is averaged over classes present in the truth only."""
    conf = confusion_matrix(pred, truth, weights, n_labels)
    rows = conf.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per = np.where(rows > 0, np.diag(conf) / np.maximum(rows, 1), np.nan)
    present = rows > 0
    avg = float(per[present].mean()) if present.any() else float("nan")
    total = conf.sum()
    glob = float(np.trace(conf) / total) if total else float("nan")
    return EvalReport(per_class_accuracy=per, average_per_class=avg, global_accuracy=glob, confusion=conf)
