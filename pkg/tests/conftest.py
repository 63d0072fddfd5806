import json

import pytest

from tutorgrade.corpus import Corpus, Dialogue, Label, Turn, TutorResponse

TRACK = "mistake_identification"


def minimal_record(dialogue_id="d1", response_ids=("r1", "r2"), labels=("Yes", "No")):
    return {
        "dialogue_id": dialogue_id,
        "history": [
            {"speaker": "student", "text": "my answer is 12"},
            {"speaker": "tutor", "text": "how did you get that?"},
        ],
        "responses": [
            {
                "response_id": rid,
                "tutor_source": "GPT-4",
                "text": f"response text {rid}",
                "labels": {TRACK: label},
            }
            for rid, label in zip(response_ids, labels)
        ],
    }


def write_corpus_file(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


def tiny_dialogue(dialogue_id, labels, id_prefix=None, text=None):
    """One dialogue with one response per label."""
    prefix = id_prefix or dialogue_id
    responses = [
        TutorResponse(
            response_id=f"{prefix}_r{i}",
            tutor_source="Human",
            raw_text=text or f"reply number {i} for {dialogue_id}",
            labels={TRACK: label, "mistake_location": label},
        )
        for i, label in enumerate(labels)
    ]
    return Dialogue(
        dialogue_id,
        [Turn("student", "here is my attempt"), Turn("tutor", "let me check")],
        responses,
    )


def tiny_corpus(n_dialogues=4, labels=(Label.YES, Label.NO, Label.TO_SOME_EXTENT)):
    dialogues = [tiny_dialogue(f"d{i}", labels) for i in range(n_dialogues)]
    return Corpus(dialogues, TRACK)


@pytest.fixture
def corpus_file(tmp_path):
    return write_corpus_file(tmp_path / "corpus.jsonl", [minimal_record()])
