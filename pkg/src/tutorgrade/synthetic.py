"""Deterministic synthetic corpora for demos, tests, and the desk pipeline.

Three generators: a desk-scale dialogue corpus with a Yes-heavy label skew
and realistic cleaning artifacts, a linearly separable corpus whose label
signal is carried by disjoint marker tokens, and a cleanup-demo corpus whose
per-source rule counts follow a fixed table.
"""

from __future__ import annotations

import random

from tutorgrade.corpus import TRACKS, Corpus, Dialogue, Label, Turn, TutorResponse
from tutorgrade.preprocess import CleaningConfig, CleaningRule

TUTOR_SOURCES = (
    "Phi3",
    "Mistral",
    "Llama-3.1-8B",
    "Llama-3.1-405B",
    "GPT-4",
    "Human",
    "Gemma",
    "Qwen",
)

_TOPICS = (
    "fractions",
    "subtraction",
    "multiplication",
    "division",
    "the area formula",
    "the exponent rule",
    "the common denominator",
    "carrying the one",
    "the order of operations",
    "unit conversion",
)

_FILLER = (
    "keep going",
    "take your time",
    "one step at a time",
    "write it out",
    "look at the numbers",
    "think about it",
)

# Label-correlated phrasing so a desk-scale model has signal to learn.
_YES_TEMPLATES = (
    "you made a mistake in step {step}, check {topic} again.",
    "there is an error: {topic} went wrong in step {step}.",
    "not quite, the slip is in {topic}. redo step {step}.",
    "your {topic} is incorrect, fix step {step} first.",
)
_SOME_TEMPLATES = (
    "you are close, but something seems off with {topic}.",
    "almost there, maybe revisit {topic}?",
    "partly right, though {topic} needs another look.",
    "hmm, consider checking {topic} once more.",
)
_NO_TEMPLATES = (
    "great job, that looks correct! {filler}.",
    "well done, let's move to the next problem.",
    "nice work, your answer is right. {filler}.",
    "that is correct, want to try a harder one?",
)

_ARTIFACTS = (
    "{text} Student: what should I do next?",
    "{text}\n```python\nx = {step}\nprint(x)\n```",
    '"{text}',
    "{text}!!!!",
)


def _response_text(rng: random.Random, label: Label, step: int) -> str:
    topic = rng.choice(_TOPICS)
    filler = rng.choice(_FILLER)
    if label == Label.YES:
        template = rng.choice(_YES_TEMPLATES)
    elif label == Label.TO_SOME_EXTENT:
        template = rng.choice(_SOME_TEMPLATES)
    else:
        template = rng.choice(_NO_TEMPLATES)
    return template.format(topic=topic, step=step, filler=filler)


def make_desk_corpus(
    n_dialogues: int = 30,
    responses_per_dialogue: int = 8,
    seed: int = 42,
    track: str = "mistake_identification",
) -> Corpus:
    """Desk-scale annotated corpus; every response is labeled for both tracks."""
    rng = random.Random(seed)
    dialogues = []
    for d in range(n_dialogues):
        step = rng.randint(1, 5)
        problem = rng.choice(_TOPICS)
        history = [
            Turn("tutor", f"let's work on a problem about {problem}."),
            Turn("student", f"i tried it and got {rng.randint(2, 99)} in step {step}."),
            Turn("tutor", "walk me through how you got that."),
            Turn("student", f"i used {rng.choice(_TOPICS)} like we practiced."),
        ]
        responses = []
        for i in range(responses_per_dialogue):
            main = rng.choices(
                [Label.YES, Label.NO, Label.TO_SOME_EXTENT], weights=[60, 25, 15]
            )[0]
            # The location judgement usually matches identification, not always.
            other = main if rng.random() < 0.7 else rng.choice(list(Label))
            labels = {
                "mistake_identification": main,
                "mistake_location": other,
            }
            # A slice of responses reads like a neighboring class, so desk-scale
            # models see annotation-style ambiguity instead of pure templates.
            text_label = main if rng.random() < 0.88 else rng.choice(list(Label))
            text = _response_text(rng, text_label, step)
            if rng.random() < 0.15:
                text = rng.choice(_ARTIFACTS).format(text=text, step=step)
            responses.append(
                TutorResponse(
                    response_id=f"d{d:03d}_r{i}",
                    tutor_source=TUTOR_SOURCES[(d * responses_per_dialogue + i) % len(TUTOR_SOURCES)],
                    raw_text=text,
                    labels=labels,
                )
            )
        dialogues.append(Dialogue(f"d{d:03d}", history, responses))
    corpus = Corpus(dialogues, track)
    corpus.validate()
    return corpus


_MARKERS = {
    Label.NO: "allcorrect",
    Label.TO_SOME_EXTENT: "partialhint",
    Label.YES: "founderror",
}


def make_separable_corpus(
    n_dialogues: int = 24,
    responses_per_dialogue: int = 6,
    seed: int = 7,
    track: str = "mistake_identification",
) -> Corpus:
    """Corpus whose classes are linearly separable over hashed n-gram features.

    Each response repeats a class-specific marker token; filler words are
    shared across classes so only the marker carries signal.
    """
    rng = random.Random(seed)
    dialogues = []
    for d in range(n_dialogues):
        history = [
            Turn("student", f"my answer to problem {d} is {rng.randint(1, 50)}."),
            Turn("tutor", "show your steps."),
        ]
        responses = []
        for i in range(responses_per_dialogue):
            label = Label(i % 3) if i < 6 else Label(rng.randrange(3))
            marker = _MARKERS[label]
            words = [marker] * 3 + rng.sample(_FILLER, 2)
            responses.append(
                TutorResponse(
                    response_id=f"s{d:03d}_r{i}",
                    tutor_source=TUTOR_SOURCES[i % len(TUTOR_SOURCES)],
                    raw_text=" ".join(words) + ".",
                    labels={t: label for t in TRACKS},
                )
            )
        dialogues.append(Dialogue(f"s{d:03d}", history, responses))
    corpus = Corpus(dialogues, track)
    corpus.validate()
    return corpus


# Per-source counts of responses that trigger exactly one cleaning rule each.
CLEANUP_COUNTS: dict[str, dict[CleaningRule, int]] = {
    "Phi3": {
        CleaningRule.EXTRA_INFO: 1,
        CleaningRule.APPENDED_DIALOGUE: 19,
        CleaningRule.CODE_ABSTRACTION: 2,
        CleaningRule.PUNCTUATION: 3,
    },
    "Mistral": {CleaningRule.PUNCTUATION: 2},
    "Llama-3.1-8B": {CleaningRule.EXTRA_INFO: 1},
    "Llama-3.1-405B": {CleaningRule.EXTRA_INFO: 11},
    "GPT-4": {CleaningRule.EXTRA_INFO: 1},
}

CLEANUP_PATTERN = r"(?i)\[meta:[^\]]*\]"

_TRIGGERS = {
    CleaningRule.EXTRA_INFO: "[meta: generated] check your work on step {i}",
    CleaningRule.APPENDED_DIALOGUE: "good effort on part {i}. Student: what should I do next?",
    CleaningRule.CODE_ABSTRACTION: "try this snippet:\n```python\nx = {i}\nprint(x)\n```",
    CleaningRule.PUNCTUATION: "well done on question {i}!!!!",
}
_UNTOUCHED = "that looks fine to me for item {i}"


def make_cleanup_corpus(
    untouched_per_source: int = 3, track: str = "mistake_identification"
) -> tuple[Corpus, CleaningConfig]:
    """Corpus whose cleaning report reproduces the CLEANUP_COUNTS table."""
    config = CleaningConfig(extra_info_patterns=[CLEANUP_PATTERN])
    dialogues = []
    serial = 0
    for source, rule_counts in CLEANUP_COUNTS.items():
        texts = []
        for rule, count in rule_counts.items():
            for _ in range(count):
                texts.append(_TRIGGERS[rule].format(i=serial))
                serial += 1
        for _ in range(untouched_per_source):
            texts.append(_UNTOUCHED.format(i=serial))
            serial += 1
        responses = [
            TutorResponse(
                response_id=f"c{serial - len(texts) + j:04d}",
                tutor_source=source,
                raw_text=text,
                labels={track: Label.YES},
            )
            for j, text in enumerate(texts)
        ]
        dialogues.append(
            Dialogue(
                dialogue_id=f"clean_{source}",
                history=[
                    Turn("student", "here is my attempt."),
                    Turn("tutor", "let me take a look."),
                ],
                responses=responses,
            )
        )
    corpus = Corpus(dialogues, track)
    corpus.validate()
    return corpus, config
