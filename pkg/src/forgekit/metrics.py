"""Confusion-matrix metrics and comparison-table rendering.

The positive class is "forged" (label 1) throughout.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise UsageError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    zero_division: bool = False  # a precision/recall denominator was zero
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp,
                       "tn": self.counts.tn, "fn": self.counts.fn},
            "zero_division": self.zero_division,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        c = d["counts"]
        return cls(accuracy=d["accuracy"], precision=d["precision"],
                   recall=d["recall"], f1=d["f1"],
                   counts=ConfusionCounts(tp=c["tp"], fp=c["fp"],
                                          tn=c["tn"], fn=c["fn"]),
                   zero_division=d.get("zero_division", False),
                   metadata=d.get("metadata", {}))


def confusion(predictions, labels) -> ConfusionCounts:
    """Exact counts over binary prediction/label vectors."""
    p = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape or p.ndim != 1:
        raise UsageError(f"predictions {p.shape} and labels {y.shape} must be "
                         "equal-length vectors")
    if not (np.isin(p, (0, 1)).all() and np.isin(y, (0, 1)).all()):
        raise UsageError("predictions and labels must be 0/1")
    return ConfusionCounts(
        tp=int(((p == 1) & (y == 1)).sum()),
        fp=int(((p == 1) & (y == 0)).sum()),
        tn=int(((p == 0) & (y == 0)).sum()),
        fn=int(((p == 0) & (y == 1)).sum()),
    )


def metrics(counts: ConfusionCounts, metadata: dict | None = None) -> MetricsReport:
    """Accuracy, precision, recall and F1 from confusion counts.

    Zero precision/recall denominators yield 0 with ``zero_division`` set.
    """
    if counts.total == 0:
        raise UsageError("cannot compute metrics over zero records")
    zero_division = False
    accuracy = (counts.tp + counts.tn) / counts.total
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision, zero_division = 0.0, True
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall, zero_division = 0.0, True
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsReport(accuracy=accuracy, precision=precision, recall=recall,
                         f1=f1, counts=counts, zero_division=zero_division,
                         metadata=metadata or {})


def render_report(entries: list[tuple[str, MetricsReport]],
                  fmt: str = "text") -> str:
    """Comparison table over runs; ``fmt`` is ``text`` or ``csv``.

    Values render as percentages with two decimals; identical inputs
    always produce identical bytes.
    """
    if not entries:
        raise UsageError("report needs at least one entry")
    if fmt == "csv":
        out = io.StringIO()
        out.write("run,accuracy,precision,recall,f1,tp,fp,tn,fn\n")
        for label, rep in entries:
            c = rep.counts
            out.write(f"{label},{rep.accuracy * 100:.2f},{rep.precision * 100:.2f},"
                      f"{rep.recall * 100:.2f},{rep.f1 * 100:.2f},"
                      f"{c.tp},{c.fp},{c.tn},{c.fn}\n")
        return out.getvalue()
    if fmt != "text":
        raise UsageError(f"unknown report format {fmt!r}")

    label_width = max(len("run"), max(len(label) for label, _ in entries))
    header = (f"{'run':<{label_width}}  {'Accuracy':>9}  {'Precision':>9}  "
              f"{'Recall':>9}  {'F1':>9}")
    rows = [header, "-" * len(header)]
    for label, rep in entries:
        rows.append(f"{label:<{label_width}}  {rep.accuracy * 100:>8.2f}%  "
                    f"{rep.precision * 100:>8.2f}%  {rep.recall * 100:>8.2f}%  "
                    f"{rep.f1 * 100:>8.2f}%")
    return "\n".join(rows) + "\n"
