"""Accuracy, weighted F1, macro F1 and modality-robustness retention."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .affect import LabelSet
from .errors import AffectDomainError, AlignmentError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true labels, columns predicted labels."""

    counts: np.ndarray

    @classmethod
    def build(cls, pred: Sequence[int], truth: Sequence[int], n_labels: int) -> ConfusionMatrix:
        if len(pred) != len(truth):
            raise AlignmentError(f"{len(pred)} predictions vs {len(truth)} truths")
        m = np.zeros((n_labels, n_labels), dtype=np.int64)
        np.add.at(m, (np.asarray(truth, dtype=int), np.asarray(pred, dtype=int)), 1)
        return cls(m)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    weighted_f1: float
    macro_f1: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    n: int
    labels: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "macro_f1": self.macro_f1,
            "n": self.n,
            "per_class": {
                name: {"precision": p, "recall": r, "f1": f, "support": s}
                for name, p, r, f, s in zip(self.labels, self.precision, self.recall, self.f1, self.support)
            },
        }


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


def report_from_confusion(cm: ConfusionMatrix, labels: LabelSet | None = None) -> MetricsReport:
    labels = labels or LabelSet()
    m = cm.counts
    n = cm.total
    tp = np.diag(m).astype(float)
    support = m.sum(axis=1)
    predicted = m.sum(axis=0)
    precision = [_div(tp[i], predicted[i]) for i in range(len(tp))]
    recall = [_div(tp[i], support[i]) for i in range(len(tp))]
    f1 = [_div(2 * p * r, p + r) for p, r in zip(precision, recall)]
    return MetricsReport(
        accuracy=_div(tp.sum(), n),
        weighted_f1=_div(sum(f * s for f, s in zip(f1, support)), n),
        macro_f1=sum(f1) / len(f1),
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        support=tuple(int(s) for s in support),
        n=n,
        labels=labels.names,
    )


def score(pred: Sequence[int], truth: Sequence[int], labels: LabelSet | None = None) -> MetricsReport:
    """Standard classification metrics with the 0/0 -> 0 convention for F1."""
    labels = labels or LabelSet()
    return report_from_confusion(ConfusionMatrix.build(pred, truth, len(labels)), labels)


def retention(acc_complete: float, acc_missing: float, acc_lowq: float) -> float:
    """Mean degraded-condition accuracy as a percentage of complete-condition accuracy."""
    if acc_complete <= 0:
        raise AffectDomainError("complete-condition accuracy must be positive")
    return 100.0 * ((acc_missing + acc_lowq) / 2.0) / acc_complete
