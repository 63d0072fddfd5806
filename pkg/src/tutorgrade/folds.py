"""Grouped K-fold assignment: whole dialogues land on one side of every split.

Fold f's validation set is the dialogues assigned index f; its training set
is everything else. Assignment balances folds by response count: dialogues
are sorted by descending response count (ties shuffled with the seeded RNG),
then greedily placed on the currently lightest fold. That bounds the spread
between fold response counts by the largest single dialogue.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from tutorgrade.corpus import Corpus


class FoldError(ValueError):
    """Invalid fold parameters or a plan inconsistent with the corpus."""


@dataclass
class FoldPlan:
    k: int
    seed: int
    assignment: dict[str, int]  # dialogue_id -> fold index in [0, k)

    def val_dialogues(self, fold: int) -> set[str]:
        return {d for d, f in self.assignment.items() if f == fold}

    def train_dialogues(self, fold: int) -> set[str]:
        return {d for d, f in self.assignment.items() if f != fold}

    def save(self, path: str | Path) -> None:
        data = {"k": self.k, "seed": self.seed, "assignment": self.assignment}
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FoldPlan":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(k=data["k"], seed=data["seed"], assignment=dict(data["assignment"]))


def grouped_kfold(corpus: Corpus, k: int, seed: int) -> FoldPlan:
    """Deterministic grouped assignment of dialogues to k folds."""
    n = len(corpus.dialogues)
    if k < 2:
        raise FoldError(f"k must be at least 2, got {k}")
    if n < k:
        raise FoldError(f"need at least k={k} dialogues, corpus has {n}")

    sizes = {d.dialogue_id: len(d.responses) for d in corpus.dialogues}
    ids = sorted(sizes)
    random.Random(seed).shuffle(ids)  # randomizes order within equal-size ties
    ids.sort(key=lambda i: -sizes[i])

    load = [0] * k
    assignment: dict[str, int] = {}
    for dialogue_id in ids:
        fold = min(range(k), key=lambda f: (load[f], f))
        assignment[dialogue_id] = fold
        load[fold] += sizes[dialogue_id]
    return FoldPlan(k=k, seed=seed, assignment=assignment)


@dataclass
class LeakageReport:
    fold_dialogues: list[int]  # validation dialogue count per fold
    fold_responses: list[int]  # validation response count per fold
    leaked_dialogues: dict[int, list[str]]  # fold -> dialogue ids on both sides
    shared_responses: dict[int, list[str]]  # fold -> response ids on both sides

    @property
    def ok(self) -> bool:
        return not self.leaked_dialogues and not self.shared_responses


def verify_no_leakage(plan: FoldPlan, corpus: Corpus) -> LeakageReport:
    """Check that no dialogue (and no response) straddles a train/val split."""
    missing = [d.dialogue_id for d in corpus.dialogues if d.dialogue_id not in plan.assignment]
    if missing:
        raise FoldError(f"plan is missing dialogues: {missing[:5]}")

    fold_dialogues = [0] * plan.k
    fold_responses = [0] * plan.k
    leaked: dict[int, list[str]] = {}
    shared: dict[int, list[str]] = {}

    # Membership is recomputed from the corpus (not trusted from the plan) so
    # corrupted corpora with responses duplicated across dialogues are caught.
    val_dialogue_ids: list[set[str]] = [set() for _ in range(plan.k)]
    train_dialogue_ids: list[set[str]] = [set() for _ in range(plan.k)]
    val_response_ids: list[set[str]] = [set() for _ in range(plan.k)]
    train_response_ids: list[set[str]] = [set() for _ in range(plan.k)]
    for d in corpus.dialogues:
        fold = plan.assignment[d.dialogue_id]
        response_ids = {r.response_id for r in d.responses}
        for f in range(plan.k):
            if f == fold:
                val_dialogue_ids[f].add(d.dialogue_id)
                val_response_ids[f] |= response_ids
            else:
                train_dialogue_ids[f].add(d.dialogue_id)
                train_response_ids[f] |= response_ids
        fold_dialogues[fold] += 1
        fold_responses[fold] += len(d.responses)

    for f in range(plan.k):
        both = val_dialogue_ids[f] & train_dialogue_ids[f]
        if both:
            leaked[f] = sorted(both)
        both_resp = val_response_ids[f] & train_response_ids[f]
        if both_resp:
            shared[f] = sorted(both_resp)

    return LeakageReport(fold_dialogues, fold_responses, leaked, shared)
