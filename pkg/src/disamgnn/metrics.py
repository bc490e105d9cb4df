"""Classification metrics over masked node sets.

Macro-F1 averages per-class F1 over the classes actually present in the
masked labels; a class with zero predicted and zero actual positives gets
F1 = 0 but still counts when present. Macro AUROC is one-vs-rest with the
midrank (tie-averaged) Mann-Whitney statistic; classes lacking positives or
negatives inside the mask are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricsReport",
    "confusion_matrix",
    "accuracy",
    "per_class_f1",
    "macro_f1",
    "macro_auroc",
    "metrics_report",
]


def _mask_index(mask, n: int) -> np.ndarray:
    idx = np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("metric mask is empty")
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError("mask index out of range")
    return idx


def confusion_matrix(preds, labels, mask, num_classes: int) -> np.ndarray:
    """(num_classes, num_classes) counts; rows are true class, cols predicted."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    idx = _mask_index(mask, labels.shape[0])
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels[idx], preds[idx]), 1)
    return cm


def accuracy(preds, labels, mask) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    idx = _mask_index(mask, labels.shape[0])
    return float(np.mean(preds[idx] == labels[idx]))


def per_class_f1(preds, labels, mask, num_classes: int) -> np.ndarray:
    """F1 per class; 0.0 whenever precision+recall degenerate to nothing."""
    cm = confusion_matrix(preds, labels, mask, num_classes)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1.0), 0.0)


def macro_f1(preds, labels, mask, num_classes: int | None = None) -> float:
    """Unweighted mean F1 over classes present in the masked labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(max(np.max(labels), np.max(preds))) + 1
    cm = confusion_matrix(preds, labels, mask, num_classes)
    f1 = per_class_f1(preds, labels, mask, num_classes)
    present = cm.sum(axis=1) > 0
    return float(f1[present].mean())


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by their group average."""
    order = np.argsort(x, kind="stable")
    sx = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def macro_auroc(class_probs, labels, mask) -> float:
    """Mean one-vs-rest AUROC over classes scorable inside the mask."""
    probs = np.asarray(class_probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    idx = _mask_index(mask, labels.shape[0])
    sub_labels = labels[idx]
    aucs = []
    for c in range(probs.shape[1]):
        pos = sub_labels == c
        n_pos = int(pos.sum())
        n_neg = pos.size - n_pos
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = _midranks(probs[idx, c])
        u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
        aucs.append(u / (n_pos * n_neg))
    if not aucs:
        raise ValueError("no class has both positives and negatives in the mask")
    return float(np.mean(aucs))


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    macro_f1: float
    macro_auroc: float
    per_class_f1: np.ndarray
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "macro_f1": self.macro_f1,
            "macro_auroc": self.macro_auroc,
            "per_class_f1": [float(v) for v in self.per_class_f1],
            "confusion": self.confusion.tolist(),
        }


def metrics_report(class_probs, labels, mask, num_classes: int) -> MetricsReport:
    """ACC / macro-F1 / macro-AUROC plus the confusion table, one mask."""
    probs = np.asarray(class_probs, dtype=np.float64)
    preds = probs.argmax(axis=1)
    return MetricsReport(
        acc=accuracy(preds, labels, mask),
        macro_f1=macro_f1(preds, labels, mask, num_classes),
        macro_auroc=macro_auroc(probs, labels, mask),
        per_class_f1=per_class_f1(preds, labels, mask, num_classes),
        confusion=confusion_matrix(preds, labels, mask, num_classes),
    )
