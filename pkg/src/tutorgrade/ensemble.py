"""Hard-voting ensemble over per-fold prediction sets.

The winner is the label with the strictly greatest vote count. A tie
(two or more labels sharing the maximum) falls back to the argmax of the
member-averaged probability vector; an exact tie there resolves to the
lowest label index. With 3 classes a tie can happen for any N >= 2,
including odd N (e.g. 4/4/2).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from tutorgrade.classify import PredictionSet
from tutorgrade.corpus import NUM_CLASSES, Label
from tutorgrade.metrics import MetricsReport, compute_report


class EnsembleError(ValueError):
    """Member prediction sets are empty or do not cover the same samples."""


@dataclass
class EnsembleRow:
    sample_id: str
    label: Label
    vote_counts: tuple[int, int, int]
    mean_probs: tuple[float, float, float]
    tie_broken: bool


@dataclass
class EnsembleResult:
    n_models: int
    rows: list[EnsembleRow]

    def labels_by_id(self) -> dict[str, Label]:
        return {row.sample_id: row.label for row in self.rows}

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                [
                    "sample_id",
                    "label",
                    "vote_no",
                    "vote_some",
                    "vote_yes",
                    "mean_p_no",
                    "mean_p_some",
                    "mean_p_yes",
                    "tie_broken",
                ]
            )
            for row in self.rows:
                writer.writerow(
                    [row.sample_id, row.label.canonical()]
                    + [str(v) for v in row.vote_counts]
                    + [repr(p) for p in row.mean_probs]
                    + [str(row.tie_broken).lower()]
                )

    @classmethod
    def load_csv(cls, path: str | Path) -> "EnsembleResult":
        rows = []
        n_models = 0
        with open(path, encoding="utf-8", newline="") as fh:
            for record in csv.DictReader(fh):
                votes = (int(record["vote_no"]), int(record["vote_some"]), int(record["vote_yes"]))
                n_models = sum(votes)
                rows.append(
                    EnsembleRow(
                        sample_id=record["sample_id"],
                        label=Label.from_string(record["label"]),
                        vote_counts=votes,
                        mean_probs=(
                            float(record["mean_p_no"]),
                            float(record["mean_p_some"]),
                            float(record["mean_p_yes"]),
                        ),
                        tie_broken=record["tie_broken"] == "true",
                    )
                )
        return cls(n_models=n_models, rows=rows)


def _aligned_rows(predictions: Sequence[PredictionSet]):
    """Sort every member's rows by sample id and require identical id multisets."""
    sorted_sets = [sorted(p.rows, key=lambda r: r.sample_id) for p in predictions]
    reference = [r.sample_id for r in sorted_sets[0]]
    for p, rows in zip(predictions, sorted_sets):
        ids = [r.sample_id for r in rows]
        if ids != reference:
            raise EnsembleError(
                f"model {p.model_id} covers different samples than model {predictions[0].model_id}"
            )
    return sorted_sets


def hard_vote(predictions: Sequence[PredictionSet]) -> EnsembleResult:
    """Majority vote per sample with mean-softmax tie-breaking."""
    if not predictions:
        raise EnsembleError("need at least one prediction set")
    sorted_sets = _aligned_rows(predictions)
    n_models = len(predictions)

    rows: list[EnsembleRow] = []
    for sample_rows in zip(*sorted_sets):
        votes = [0] * NUM_CLASSES
        for r in sample_rows:
            votes[int(r.label)] += 1
        mean_probs = np.mean([r.probs for r in sample_rows], axis=0)
        top = max(votes)
        leaders = [c for c, v in enumerate(votes) if v == top]
        if len(leaders) == 1:
            label = Label(leaders[0])
            tie_broken = False
        else:
            # np.argmax resolves exact float ties to the lowest index.
            label = Label(int(np.argmax(mean_probs)))
            tie_broken = True
        rows.append(
            EnsembleRow(
                sample_id=sample_rows[0].sample_id,
                label=label,
                vote_counts=tuple(votes),
                mean_probs=tuple(float(p) for p in mean_probs),
                tie_broken=tie_broken,
            )
        )
    return EnsembleResult(n_models=n_models, rows=rows)


@dataclass
class MemberComparison:
    ensemble_report: MetricsReport
    member_macro_f1: list[float]
    delta_vs_mean_member: float

    def to_dict(self) -> dict:
        return {
            "ensemble_macro_f1": self.ensemble_report.macro_f1,
            "member_macro_f1": self.member_macro_f1,
            "mean_member_macro_f1": float(np.mean(self.member_macro_f1)),
            "delta_vs_mean_member": self.delta_vs_mean_member,
        }


def compare_to_members(
    result: EnsembleResult,
    predictions: Sequence[PredictionSet],
    gold: Mapping[str, Label],
) -> MemberComparison:
    """Ensemble macro-F1 next to each member's, plus the delta vs their mean."""
    missing = [row.sample_id for row in result.rows if row.sample_id not in gold]
    if missing:
        raise EnsembleError(f"gold labels missing for samples: {missing[:5]}")
    gold_seq = [gold[row.sample_id] for row in result.rows]
    ensemble_report = compute_report(gold_seq, [row.label for row in result.rows])
    member_scores = []
    for p in predictions:
        member_gold = [gold[r.sample_id] for r in p.rows]
        member_scores.append(compute_report(member_gold, [r.label for r in p.rows]).macro_f1)
    delta = ensemble_report.macro_f1 - float(np.mean(member_scores))
    return MemberComparison(ensemble_report, member_scores, delta)
