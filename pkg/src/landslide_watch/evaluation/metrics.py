"""Confusion-matrix counts and the four binary metrics."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, NamedTuple

POSITIVE_LABEL = "landslide"
NEGATIVE_LABEL = "not_landslide"


@dataclass(frozen=True)
class ConfusionMatrix:
    """TP/FP/FN/TN counts with the landslide class positive."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[str, str]]) -> "ConfusionMatrix":
        """Count (truth, predicted) label pairs."""
        tp = fp = fn = tn = 0
        for truth, predicted in pairs:
            if truth not in (POSITIVE_LABEL, NEGATIVE_LABEL):
                raise ValueError(f"unknown truth label {truth!r}")
            if predicted not in (POSITIVE_LABEL, NEGATIVE_LABEL):
                raise ValueError(f"unknown predicted label {predicted!r}")
            if truth == POSITIVE_LABEL:
                if predicted == POSITIVE_LABEL:
                    tp += 1
                else:
                    fn += 1
            else:
                if predicted == POSITIVE_LABEL:
                    fp += 1
                else:
                    tn += 1
        return cls(tp=tp, fp=fp, fn=fn, tn=tn)


class Metrics(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    f1: float


def metrics_from_confusion(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall, and F1 at full precision.

    Zero-denominator cases return 0 so the function is total on any non-empty
    matrix; an empty matrix is a domain error.
    """
    total = cm.total
    if total == 0:
        raise ValueError("confusion matrix is empty")
    accuracy = (cm.tp + cm.tn) / total
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) > 0 else 0.0
    f1_denom = 2 * cm.tp + cm.fp + cm.fn
    f1 = 2 * cm.tp / f1_denom if f1_denom > 0 else 0.0
    return Metrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def round_half_up(value: float, places: int = 3) -> float:
    """Reporting rounding: fixed decimal places, halves away from truncation."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))
