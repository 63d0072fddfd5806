"""Data model for annotated educational dialogues.

A corpus is a list of dialogues; each dialogue carries its conversation
history plus the tutor responses written for it. Responses are annotated
per track ("mistake_identification", "mistake_location") with one of three
labels. Corpora are stored as UTF-8 JSON lines, one dialogue per line.

Objects are treated as immutable after load and are safe to share across
workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Iterator

TRACKS = ("mistake_identification", "mistake_location")
SPEAKERS = ("student", "tutor")


class CorpusFormatError(ValueError):
    """A corpus file line could not be parsed."""


class CorpusValidationError(ValueError):
    """Parsed corpus content violates a model invariant."""


class Label(IntEnum):
    """Three-way annotation; index order is fixed and serialization-stable."""

    NO = 0
    TO_SOME_EXTENT = 1
    YES = 2

    def canonical(self) -> str:
        return _LABEL_TO_STRING[self]

    @classmethod
    def from_string(cls, s: str) -> "Label":
        try:
            return _STRING_TO_LABEL[s.strip().lower()]
        except KeyError:
            raise CorpusValidationError(f"unknown label string: {s!r}") from None


_LABEL_TO_STRING = {
    Label.NO: "No",
    Label.TO_SOME_EXTENT: "To some extent",
    Label.YES: "Yes",
}
_STRING_TO_LABEL = {v.lower(): k for k, v in _LABEL_TO_STRING.items()}

LABELS = (Label.NO, Label.TO_SOME_EXTENT, Label.YES)
NUM_CLASSES = len(LABELS)


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str

    def __post_init__(self):
        if self.speaker not in SPEAKERS:
            raise CorpusValidationError(f"unknown speaker: {self.speaker!r}")
        if not self.text.strip():
            raise CorpusValidationError("turn text is empty")


@dataclass
class TutorResponse:
    response_id: str
    tutor_source: str
    raw_text: str
    cleaned_text: str | None = None
    labels: dict[str, Label] = field(default_factory=dict)

    def __post_init__(self):
        if not self.response_id:
            raise CorpusValidationError("response_id is empty")
        if not self.raw_text.strip():
            raise CorpusValidationError(f"response {self.response_id}: text is empty")
        for track in self.labels:
            if track not in TRACKS:
                raise CorpusValidationError(
                    f"response {self.response_id}: unknown track {track!r}"
                )

    def label_for(self, track: str) -> Label:
        if track not in self.labels:
            raise CorpusValidationError(
                f"response {self.response_id}: no label for track {track!r}"
            )
        return self.labels[track]

    @property
    def text_for_model(self) -> str:
        return self.cleaned_text if self.cleaned_text is not None else self.raw_text


@dataclass
class Dialogue:
    dialogue_id: str
    history: list[Turn]
    responses: list[TutorResponse]

    def __post_init__(self):
        if not self.dialogue_id:
            raise CorpusValidationError("dialogue_id is empty")
        if not self.history:
            raise CorpusValidationError(f"dialogue {self.dialogue_id}: empty history")
        if not self.responses:
            raise CorpusValidationError(f"dialogue {self.dialogue_id}: no responses")


@dataclass
class Corpus:
    dialogues: list[Dialogue]
    track: str

    def __post_init__(self):
        if self.track not in TRACKS:
            raise CorpusValidationError(f"unknown track: {self.track!r}")

    @property
    def n_responses(self) -> int:
        return sum(len(d.responses) for d in self.dialogues)

    @property
    def annotated(self) -> bool:
        """True when every response carries a label for the active track."""
        return all(self.track in r.labels for r in self.responses())

    def responses(self) -> Iterator[TutorResponse]:
        for d in self.dialogues:
            yield from d.responses

    def response_items(self) -> Iterator[tuple[Dialogue, TutorResponse]]:
        for d in self.dialogues:
            for r in d.responses:
                yield d, r

    def validate(self) -> None:
        seen_dialogues: set[str] = set()
        seen_responses: set[str] = set()
        for d in self.dialogues:
            if d.dialogue_id in seen_dialogues:
                raise CorpusValidationError(f"duplicate dialogue_id: {d.dialogue_id!r}")
            seen_dialogues.add(d.dialogue_id)
            for r in d.responses:
                if r.response_id in seen_responses:
                    raise CorpusValidationError(
                        f"duplicate response_id: {r.response_id!r}"
                    )
                seen_responses.add(r.response_id)


def parse_dialogue(record: dict) -> Dialogue:
    """Build a Dialogue from one decoded corpus record."""
    try:
        history = [Turn(t["speaker"], t["text"]) for t in record["history"]]
        responses = [
            TutorResponse(
                response_id=r["response_id"],
                tutor_source=r.get("tutor_source", ""),
                raw_text=r["text"],
                cleaned_text=r.get("cleaned_text"),
                labels={k: Label.from_string(v) for k, v in r.get("labels", {}).items()},
            )
            for r in record["responses"]
        ]
        return Dialogue(record["dialogue_id"], history, responses)
    except KeyError as exc:
        raise CorpusFormatError(f"missing field {exc}") from None


def dialogue_to_record(d: Dialogue) -> dict:
    """Inverse of parse_dialogue, with canonical field order and label strings."""
    record: dict = {
        "dialogue_id": d.dialogue_id,
        "history": [{"speaker": t.speaker, "text": t.text} for t in d.history],
        "responses": [],
    }
    for r in d.responses:
        row: dict = {
            "response_id": r.response_id,
            "tutor_source": r.tutor_source,
            "text": r.raw_text,
        }
        if r.cleaned_text is not None:
            row["cleaned_text"] = r.cleaned_text
        row["labels"] = {k: r.labels[k].canonical() for k in sorted(r.labels)}
        record["responses"].append(row)
    return record


def load_corpus(path: str | Path, track: str) -> Corpus:
    """Load and validate a JSONL corpus file.

    Raises CorpusFormatError naming the offending line on parse problems and
    CorpusValidationError on invariant violations (duplicate ids, unknown
    labels or speakers, empty texts).
    """
    dialogues = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: {exc}") from None
            try:
                dialogues.append(parse_dialogue(record))
            except (CorpusFormatError, CorpusValidationError, TypeError) as exc:
                raise type(exc)(f"{path}: line {lineno}: {exc}") from None
    corpus = Corpus(dialogues, track)
    corpus.validate()
    return corpus


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as one JSON record per dialogue, in canonical form."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.dialogues:
            fh.write(json.dumps(dialogue_to_record(d), ensure_ascii=False))
            fh.write("\n")


def with_cleaned(corpus: Corpus, cleaned: dict[str, str]) -> Corpus:
    """Copy of the corpus with cleaned_text filled in from a response_id map."""
    dialogues = []
    for d in corpus.dialogues:
        responses = [
            replace(r, cleaned_text=cleaned.get(r.response_id, r.cleaned_text))
            for r in d.responses
        ]
        dialogues.append(Dialogue(d.dialogue_id, d.history, responses))
    return Corpus(dialogues, corpus.track)


def label_distribution(corpus: Corpus) -> dict[Label, int]:
    """Count responses per label for the active track; corpus must be annotated."""
    if not corpus.annotated:
        raise CorpusValidationError(
            f"corpus is not fully annotated for track {corpus.track!r}"
        )
    counts = {label: 0 for label in LABELS}
    for r in corpus.responses():
        counts[r.label_for(corpus.track)] += 1
    return counts
