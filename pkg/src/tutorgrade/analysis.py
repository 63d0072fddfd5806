"""Analysis artifacts: embedding exports, confidence statistics, error reports.

Embeddings are exported as flat CSV (one row per sample x fold-model pair)
for external projection tools; the in-repo 2-D view is a PCA projection.
Confidence is the maximum normalized probability, so it lives in [1/3, 1]
for 3-class predictions. Misclassification records carry advisory taxonomy
tags from surface-pattern heuristics; they are review aids, not labels.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from tutorgrade.backends import EncoderBackend
from tutorgrade.classify import Checkpoint, ModelInput, PredictionSet, forward
from tutorgrade.corpus import LABELS, Label
from tutorgrade.ensemble import EnsembleResult


class AnalysisError(ValueError):
    """Inputs unusable for the requested analysis."""


ERROR_TAGS = (
    "FalseNegativeMissedSignal",
    "FalsePositiveOverinterpretation",
    "PartialFullConfusion",
    "HedgedLanguageConfusion",
    "ContextualMiss",
    "TemplateBias",
)


@dataclass
class EmbeddingRow:
    sample_id: str
    fold: int
    gold: Label
    pred: Label
    vector: np.ndarray


@dataclass
class EmbeddingExport:
    dim: int
    rows: list[EmbeddingRow]

    def matrix(self) -> np.ndarray:
        return np.stack([row.vector for row in self.rows])

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["sample_id", "fold", "gold", "pred"] + [f"e{i}" for i in range(self.dim)]
            )
            for row in self.rows:
                writer.writerow(
                    [row.sample_id, row.fold, row.gold.canonical(), row.pred.canonical()]
                    + [repr(float(x)) for x in row.vector]
                )

    @classmethod
    def load_csv(cls, path: str | Path) -> "EmbeddingExport":
        rows = []
        dim = 0
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            dim = len(header) - 4
            for record in reader:
                rows.append(
                    EmbeddingRow(
                        sample_id=record[0],
                        fold=int(record[1]),
                        gold=Label.from_string(record[2]),
                        pred=Label.from_string(record[3]),
                        vector=np.array([float(x) for x in record[4:]]),
                    )
                )
        return cls(dim=dim, rows=rows)


def export_embeddings(
    backend: EncoderBackend,
    checkpoints: Sequence[Checkpoint],
    inputs: Sequence[ModelInput],
    sample_ids: Sequence[str],
    gold: Sequence[Label],
) -> EmbeddingExport:
    """One row per (sample, fold-model) pair, with that model's prediction."""
    if not (len(inputs) == len(sample_ids) == len(gold)):
        raise AnalysisError("inputs, sample_ids and gold must align")
    rows: list[EmbeddingRow] = []
    X = np.asarray(backend.encode_batch([m.text for m in inputs]), dtype=np.float64)
    if not np.isfinite(X).all():
        raise AnalysisError("backend produced non-finite embeddings")
    for ckpt in checkpoints:
        if ckpt.head.dim != backend.dim:
            raise AnalysisError(
                f"checkpoint fold {ckpt.fold} dim {ckpt.head.dim} != backend dim {backend.dim}"
            )
        _, probs = forward(ckpt.head, X, train_mode=False)
        preds = np.argmax(probs, axis=1)
        for i, sid in enumerate(sample_ids):
            rows.append(EmbeddingRow(sid, ckpt.fold, gold[i], Label(int(preds[i])), X[i]))
    return EmbeddingExport(dim=backend.dim, rows=rows)


def pca_project(export: EmbeddingExport, dims: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Mean-centered projection onto the top principal directions.

    Component signs are fixed by making each component's largest-magnitude
    loading positive. Returns (projected rows, explained-variance ratios).
    """
    X = export.matrix()
    if X.shape[0] < 2:
        raise AnalysisError("need at least 2 rows to project")
    centered = X - X.mean(axis=0)
    _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
    if not (singular_values > 1e-12 * max(1.0, singular_values[0])).any():
        raise AnalysisError("embeddings have rank 0 after centering")
    components = vt[:dims]
    for i in range(components.shape[0]):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    variances = singular_values**2
    ratios = variances[:dims] / variances.sum()
    return centered @ components.T, ratios


def save_projection_csv(
    export: EmbeddingExport, projected: np.ndarray, path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "fold", "gold", "pred", "x", "y"])
        for row, point in zip(export.rows, projected):
            writer.writerow(
                [row.sample_id, row.fold, row.gold.canonical(), row.pred.canonical()]
                + [repr(float(v)) for v in point[:2]]
            )


@dataclass
class BoxStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float


@dataclass
class ConfidenceStats:
    bin_edges: list[float]
    bin_counts: list[int]
    per_class_box: dict[str, BoxStats | None]

    def to_dict(self) -> dict:
        return {
            "histogram": {"edges": self.bin_edges, "counts": self.bin_counts},
            "per_class_box": {
                name: None if box is None else box.__dict__
                for name, box in self.per_class_box.items()
            },
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def render(self) -> str:
        lines = ["confidence histogram:"]
        peak = max(self.bin_counts) if self.bin_counts else 0
        for lo, hi, count in zip(self.bin_edges, self.bin_edges[1:], self.bin_counts):
            bar = "#" * (0 if peak == 0 else round(40 * count / peak))
            lines.append(f"  [{lo:.3f}, {hi:.3f})  {count:>6}  {bar}")
        lines.append("confidence by predicted class (min/q1/median/q3/max):")
        for name, box in self.per_class_box.items():
            if box is None:
                lines.append(f"  {name:<15} (no predictions)")
            else:
                lines.append(
                    f"  {name:<15} {box.min:.4f} / {box.q1:.4f} / {box.median:.4f}"
                    f" / {box.q3:.4f} / {box.max:.4f}"
                )
        return "\n".join(lines)


def _confidences(predictions: PredictionSet | EnsembleResult) -> tuple[list[float], list[Label]]:
    if isinstance(predictions, EnsembleResult):
        pairs = [(max(r.mean_probs), r.label) for r in predictions.rows]
    else:
        pairs = [(max(r.probs), r.label) for r in predictions.rows]
    if not pairs:
        raise AnalysisError("no predictions to analyze")
    return [conf for conf, _ in pairs], [label for _, label in pairs]


def confidence_stats(
    predictions: PredictionSet | EnsembleResult, bins: int = 10
) -> ConfidenceStats:
    """Histogram plus per-predicted-class five-number summaries.

    Confidence is the max (mean) probability; quartiles use linear
    interpolation. Values are clipped into [1/3, 1] so histogram counts
    always sum to the prediction count despite float round-off.
    """
    conf, labels = _confidences(predictions)
    lo = 1.0 / 3.0
    values = np.clip(np.asarray(conf, dtype=np.float64), lo, 1.0)
    counts, edges = np.histogram(values, bins=bins, range=(lo, 1.0))
    per_class: dict[str, BoxStats | None] = {}
    for label in LABELS:
        class_values = values[[l == label for l in labels]]
        if class_values.size == 0:
            per_class[label.canonical()] = None
        else:
            q1, median, q3 = np.percentile(class_values, [25, 50, 75])
            per_class[label.canonical()] = BoxStats(
                float(class_values.min()), float(q1), float(median), float(q3), float(class_values.max())
            )
    return ConfidenceStats(
        bin_edges=[float(e) for e in edges],
        bin_counts=[int(c) for c in counts],
        per_class_box=per_class,
    )


@dataclass
class TagRules:
    """Surface-pattern heuristics used to suggest taxonomy tags."""

    hedge_lexicon: list[str] = field(
        default_factory=lambda: ["maybe", "perhaps", "might", "possibly", "consider", "try"]
    )
    praise_lexicon: list[str] = field(
        default_factory=lambda: ["great work", "good job", "well done", "nice work", "great job"]
    )
    context_patterns: list[str] = field(default_factory=list)

    def __post_init__(self):
        for pattern in self.context_patterns:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise AnalysisError(f"bad context pattern {pattern!r}: {exc}") from None


@dataclass
class ErrorRecord:
    sample_id: str
    gold: Label
    pred: Label
    text: str
    tags: list[str]

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "gold": self.gold.canonical(),
            "pred": self.pred.canonical(),
            "text": self.text,
            "tags": self.tags,
        }


def _word_in(text: str, phrase: str) -> bool:
    return re.search(rf"\b{re.escape(phrase)}\b", text.lower()) is not None


def error_report(
    gold: Sequence[Label],
    pred: Sequence[Label],
    sample_ids: Sequence[str],
    texts: Sequence[str],
    tag_rules: TagRules | None = None,
) -> list[ErrorRecord]:
    """One record per misclassification, with advisory taxonomy tags."""
    if not (len(gold) == len(pred) == len(sample_ids) == len(texts)):
        raise AnalysisError("gold, pred, sample_ids and texts must align")
    rules = tag_rules or TagRules()
    records: list[ErrorRecord] = []
    for g, p, sid, text in zip(gold, pred, sample_ids, texts):
        if g == p:
            continue
        tags: list[str] = []
        if g == Label.YES and p in (Label.NO, Label.TO_SOME_EXTENT):
            tags.append("FalseNegativeMissedSignal")
        if g == Label.NO and p == Label.YES:
            tags.append("FalsePositiveOverinterpretation")
        if {g, p} == {Label.YES, Label.TO_SOME_EXTENT}:
            tags.append("PartialFullConfusion")
        if any(_word_in(text, h) for h in rules.hedge_lexicon):
            tags.append("HedgedLanguageConfusion")
        if any(re.search(c, text, re.IGNORECASE) for c in rules.context_patterns):
            tags.append("ContextualMiss")
        if g == Label.NO and p != Label.NO and any(
            phrase in text.lower() for phrase in rules.praise_lexicon
        ):
            tags.append("TemplateBias")
        records.append(ErrorRecord(sid, g, p, text, tags))
    return records


def save_error_report(records: Sequence[ErrorRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=2, sort_keys=True)
        fh.write("\n")
