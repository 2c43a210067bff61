from dataclasses import dataclass
from typing import Sequence

import numpy as np

from speaker_adaptive.exceptions import ContractError, UndefinedMetricError


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """counts[t, p]: utterances of true class t predicted as p."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ContractError(f"Confusion matrix must be square, got {counts.shape}")
        if np.any(counts < 0):
            raise ContractError("Confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(
            self.counts, other.counts
        )

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion_matrix(
    predictions: Sequence[int] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    num_classes: int,
) -> ConfusionMatrix:
    predicted = np.asarray(predictions, dtype=np.int64).reshape(-1)
    truth = np.asarray(labels, dtype=np.int64).reshape(-1)
    if predicted.shape != truth.shape:
        raise ContractError(f"{predicted.size} predictions for {truth.size} labels")
    for name, values in (("prediction", predicted), ("label", truth)):
        if values.size and (values.min() < 0 or values.max() >= num_classes):
            raise IndexError(f"{name} outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truth, predicted), 1)
    return ConfusionMatrix(counts)


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """2PR/(P+R) per class; 0 when P+R = 0, e.g. a class never seen nor predicted."""
    tp = np.diag(cm.counts).astype(np.float64)
    predicted = cm.counts.sum(axis=0).astype(np.float64)
    actual = cm.counts.sum(axis=1).astype(np.float64)
    # 2PR/(P+R) simplifies to 2TP/(predicted+actual)
    denominator = predicted + actual
    scores = np.zeros(cm.num_classes)
    np.divide(2.0 * tp, denominator, out=scores, where=denominator > 0)
    return scores


def _require_counts(cm: ConfusionMatrix) -> None:
    if cm.total == 0:
        raise UndefinedMetricError("F1 is undefined for an empty confusion matrix")


def weighted_f1(cm: ConfusionMatrix) -> float:
    _require_counts(cm)
    support = cm.support().astype(np.float64)
    return float(np.dot(per_class_f1(cm), support) / support.sum())


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of the per-class F1 over classes with true support."""
    _require_counts(cm)
    present = cm.support() > 0
    return float(per_class_f1(cm)[present].mean())


def accuracy(cm: ConfusionMatrix) -> float:
    _require_counts(cm)
    return float(np.trace(cm.counts) / cm.total)


def majority_baseline(
    labels: Sequence[int] | np.ndarray, num_classes: int
) -> ConfusionMatrix:
    """Always predict the most frequent label (lowest index on ties)."""
    truth = np.asarray(labels, dtype=np.int64)
    if truth.size == 0:
        raise UndefinedMetricError("No labels to take a majority from")
    majority = int(np.argmax(np.bincount(truth, minlength=num_classes)))
    return confusion_matrix(np.full_like(truth, majority), truth, num_classes)
