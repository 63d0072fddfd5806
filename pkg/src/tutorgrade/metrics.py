"""Accuracy, per-class F1, macro-F1, confusion matrices, and CV aggregates.

Conventions, pinned by tests: precision or recall with a 0/0 numerator is 0,
and F1 is 0 when precision + recall is 0. Macro-F1 always averages over the
full class schema, even when a class is absent from a particular split, so
fold size never changes the denominator. The lenient variant rescores after
merging "To some extent" into "Yes" (a 2-class schema).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from tutorgrade.corpus import LABELS, NUM_CLASSES, Label


class MetricsError(ValueError):
    """Inputs unusable for scoring (length mismatch, empty)."""


LENIENT_CLASSES = ("No", "Yes")


@dataclass
class ConfusionMatrix:
    """counts[g][p] = number of samples with gold class g predicted as p."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_rows(self) -> list[list[str]]:
        header = ["gold\\pred", *self.class_names]
        rows = [header]
        for g, name in enumerate(self.class_names):
            rows.append([name] + [str(int(c)) for c in self.counts[g]])
        return rows

    def render(self) -> str:
        """Plain-text grid with aligned columns."""
        rows = self.to_rows()
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        lines = []
        for r in rows:
            lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.to_rows())


def confusion_counts(gold: Sequence[int], pred: Sequence[int], n_classes: int) -> np.ndarray:
    if len(gold) != len(pred):
        raise MetricsError(f"gold and pred lengths differ: {len(gold)} vs {len(pred)}")
    if len(gold) == 0:
        raise MetricsError("cannot score an empty prediction set")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for g, p in zip(gold, pred):
        counts[int(g), int(p)] += 1
    return counts


def confusion_matrix(gold: Sequence[Label], pred: Sequence[Label]) -> ConfusionMatrix:
    counts = confusion_counts(gold, pred, NUM_CLASSES)
    return ConfusionMatrix(counts, tuple(label.canonical() for label in LABELS))


def per_class_f1(cm: ConfusionMatrix) -> list[float]:
    scores = []
    for c in range(cm.n_classes):
        tp = float(cm.counts[c, c])
        fp = float(cm.counts[:, c].sum() - tp)
        fn = float(cm.counts[c, :].sum() - tp)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        scores.append(f1)
    return scores


def macro_f1(cm: ConfusionMatrix) -> float:
    return float(np.mean(per_class_f1(cm)))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total < 1:
        raise MetricsError("cannot score an empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


def lenient_collapse(labels: Sequence[Label]) -> list[int]:
    """Map To-some-extent onto Yes; output alphabet is (No=0, Yes=1)."""
    return [0 if label == Label.NO else 1 for label in labels]


@dataclass
class MetricsReport:
    accuracy: float
    per_class_f1: list[float]
    macro_f1: float
    confusion: ConfusionMatrix
    lenient: "MetricsReport | None" = None

    def to_dict(self) -> dict:
        data = {
            "accuracy": self.accuracy,
            "per_class_f1": dict(zip(self.confusion.class_names, self.per_class_f1)),
            "macro_f1": self.macro_f1,
            "confusion": {
                "classes": list(self.confusion.class_names),
                "counts": self.confusion.counts.tolist(),
            },
        }
        if self.lenient is not None:
            data["lenient"] = self.lenient.to_dict()
        return data

    def write_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _report_from_counts(counts: np.ndarray, class_names: tuple[str, ...]) -> MetricsReport:
    cm = ConfusionMatrix(counts, class_names)
    f1s = per_class_f1(cm)
    return MetricsReport(
        accuracy=accuracy(cm),
        per_class_f1=f1s,
        macro_f1=float(np.mean(f1s)),
        confusion=cm,
    )


def compute_report(
    gold: Sequence[Label], pred: Sequence[Label], lenient: bool = True
) -> MetricsReport:
    """Exact 3-class report, optionally with the nested lenient 2-class report."""
    report = _report_from_counts(
        confusion_counts(gold, pred, NUM_CLASSES),
        tuple(label.canonical() for label in LABELS),
    )
    if lenient:
        report.lenient = _report_from_counts(
            confusion_counts(lenient_collapse(gold), lenient_collapse(pred), 2),
            LENIENT_CLASSES,
        )
    return report


@dataclass
class CVAggregate:
    """Both aggregation views: per-fold mean/std and pooled-prediction metrics."""

    fold_macro_f1: list[float]
    fold_accuracy: list[float]
    mean_macro_f1: float
    std_macro_f1: float
    mean_accuracy: float
    std_accuracy: float
    pooled: MetricsReport | None = None

    def to_dict(self) -> dict:
        data = {
            "per_fold": {
                "macro_f1": self.fold_macro_f1,
                "accuracy": self.fold_accuracy,
                "mean_macro_f1": self.mean_macro_f1,
                "std_macro_f1": self.std_macro_f1,
                "mean_accuracy": self.mean_accuracy,
                "std_accuracy": self.std_accuracy,
            }
        }
        if self.pooled is not None:
            data["pooled"] = self.pooled.to_dict()
        return data

    def write_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def aggregate_cv(
    per_fold: Sequence[MetricsReport],
    pooled: tuple[Sequence[Label], Sequence[Label]] | None = None,
) -> CVAggregate:
    """Mean +/- population std of per-fold scores, plus pooled metrics if given."""
    if not per_fold:
        raise MetricsError("need at least one fold report")
    f1s = [r.macro_f1 for r in per_fold]
    accs = [r.accuracy for r in per_fold]
    pooled_report = None
    if pooled is not None:
        pooled_report = compute_report(pooled[0], pooled[1])
    return CVAggregate(
        fold_macro_f1=f1s,
        fold_accuracy=accs,
        mean_macro_f1=float(np.mean(f1s)),
        std_macro_f1=float(np.std(f1s)),
        mean_accuracy=float(np.mean(accs)),
        std_accuracy=float(np.std(accs)),
        pooled=pooled_report,
    )
