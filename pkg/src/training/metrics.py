"""
Classification metrics over confusion counts.

The positive class is label 1. Any other label counts as negative, so a
multiclass run is scored one-vs-rest against class 1.
"""

from dataclasses import dataclass
from typing import Iterable, Tuple

from pydantic import BaseModel, Field, model_validator

from src.utils.exceptions import ContractError, UndefinedMetricError

POSITIVE_LABEL = 1


@dataclass(frozen=True)
class ConfusionCounts:
    """TP/TN/FP/FN tallies of one evaluation."""

    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ContractError(f"confusion counts must be nonnegative: {self}")

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


def tally(pairs: Iterable[Tuple[int, int]], positive: int = POSITIVE_LABEL) -> ConfusionCounts:
    """
    Count (label, prediction) pairs.

    Args:
        pairs: (true label, predicted label) per record
        positive: Label treated as the positive class

    Returns:
        ConfusionCounts over all pairs
    """
    tp = tn = fp = fn = 0
    for label, prediction in pairs:
        actual = label == positive
        predicted = prediction == positive
        if actual and predicted:
            tp += 1
        elif actual:
            fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp, tn, fp, fn)


def require_positives(labels: Iterable[int], where: str, positive: int = POSITIVE_LABEL) -> None:
    """Raise UndefinedMetricError naming `where` when no label is positive."""
    if not any(label == positive for label in labels):
        raise UndefinedMetricError(
            f"{where} has no positive (label {positive}) records; recall is undefined"
        )


def accuracy(c: ConfusionCounts) -> float:
    """(TP + TN) / N."""
    if c.n == 0:
        raise UndefinedMetricError("accuracy is undefined for zero samples")
    return (c.tp + c.tn) / c.n


def recall(c: ConfusionCounts) -> float:
    """TP / (TP + FN)."""
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("recall is undefined without positive samples")
    return c.tp / (c.tp + c.fn)


def precision(c: ConfusionCounts) -> float:
    """TP / (TP + FP); 0 when nothing was predicted positive."""
    if c.tp + c.fp == 0:
        return 0.0
    return c.tp / (c.tp + c.fp)


def f1(precision_value: float, recall_value: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    total = precision_value + recall_value
    if total <= 0.0:
        return 0.0
    return 2.0 * precision_value * recall_value / total


class MetricReport(BaseModel):
    """One row of an evaluation or ablation report."""

    model_name: str
    accuracy: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    n_eval: int = Field(ge=0)

    model_config = {"frozen": True, "protected_namespaces": ()}

    @model_validator(mode="after")
    def validate_f1(self) -> "MetricReport":
        expected = f1(self.precision, self.recall)
        if abs(expected - self.f1) > 1e-12:
            raise ValueError(f"f1 {self.f1} inconsistent with precision and recall ({expected})")
        return self

    @classmethod
    def from_counts(cls, model_name: str, counts: ConfusionCounts) -> "MetricReport":
        p, r = precision(counts), recall(counts)
        return cls(
            model_name=model_name,
            accuracy=accuracy(counts),
            recall=r,
            precision=p,
            f1=f1(p, r),
            n_eval=counts.n,
        )

    def csv_row(self) -> str:
        """`model,accuracy,recall,f1,n_eval` with 4-decimal fractions."""
        return (
            f"{self.model_name},{self.accuracy:.4f},{self.recall:.4f},"
            f"{self.f1:.4f},{self.n_eval}"
        )


REPORT_HEADER = "model,accuracy,recall,f1,n_eval"
