"""Sanitization of tutor responses and assembly of model inputs.

Four cleaning rules are applied in a fixed order, then the text is
lowercased (punctuation preserved). The order matters: appended-dialogue
markers are detected before lowercasing, and code fences are abstracted
before punctuation collapse so the placeholder survives intact.

Model inputs concatenate speaker-prefixed history turns with the cleaned
response, separated by a marker token, and are pruned to a token budget by
dropping greeting/small-talk turns first, then the earliest turns.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from tutorgrade.corpus import Corpus, Turn, TutorResponse, with_cleaned

CODE_PLACEHOLDER = "<<python code>>"
SEPARATOR = "[SEP]"

DEFAULT_DIALOGUE_MARKERS = ("student:", "tutor:", "user:")
DEFAULT_GREETING_LEXICON = (
    "hello",
    "hi",
    "hey",
    "good morning",
    "good afternoon",
    "good evening",
    "how are you",
    "nice to meet you",
    "welcome",
    "thanks",
    "thank you",
    "you're welcome",
    "have a great day",
    "see you",
)


class CleaningConfigError(ValueError):
    """Invalid cleaning configuration (e.g. a malformed removal pattern)."""


class CleaningRule(Enum):
    EXTRA_INFO = "Extra Info"
    APPENDED_DIALOGUE = "Appended Dialogue Trimming"
    CODE_ABSTRACTION = "Code Abstraction"
    PUNCTUATION = "Punctuation Cleanup"


RULE_ORDER = (
    CleaningRule.EXTRA_INFO,
    CleaningRule.APPENDED_DIALOGUE,
    CleaningRule.CODE_ABSTRACTION,
    CleaningRule.PUNCTUATION,
)


@dataclass
class CleaningConfig:
    extra_info_patterns: list[str] = field(default_factory=list)
    dialogue_markers: list[str] = field(default_factory=lambda: list(DEFAULT_DIALOGUE_MARKERS))
    greeting_lexicon: list[str] = field(default_factory=lambda: list(DEFAULT_GREETING_LEXICON))
    budget: int = 512
    train_truncation: int = 300

    def __post_init__(self):
        for pattern in self.extra_info_patterns:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise CleaningConfigError(f"bad removal pattern {pattern!r}: {exc}") from None
        if self.budget <= 0 or self.train_truncation <= 0:
            raise CleaningConfigError("token budgets must be positive")

    @classmethod
    def from_file(cls, path: str | Path) -> "CleaningConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CleaningConfigError(f"{path}: {exc}") from None
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise CleaningConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**data)

    def to_file(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def lowercase_preserving_punct(text: str) -> str:
    """Lowercase every cased character; punctuation and digits pass through."""
    return text.lower()


def strip_extra_info(text: str, patterns: Sequence[str]) -> tuple[str, bool]:
    """Remove metadata/annotation matches; collapse the whitespace left behind."""
    compiled = []
    for pattern in patterns:
        try:
            compiled.append(re.compile(pattern))
        except re.error as exc:
            raise CleaningConfigError(f"bad removal pattern {pattern!r}: {exc}") from None
    if not any(p.search(text) for p in compiled):
        return text, False
    out = text
    for p in compiled:
        out = p.sub(" ", out)
    out = re.sub(r"[ \t]{2,}", " ", out)
    out = re.sub(r" +\n", "\n", out)
    return out.strip(), True


def _marker_regex(markers: Sequence[str]) -> re.Pattern:
    alts = "|".join(re.escape(m) for m in markers)
    # A marker counts as an appended turn only at a turn boundary: the start
    # of a line or right after sentence-ending punctuation.
    return re.compile(rf"(?:^|(?<=[\n.!?]))\s*(?:{alts})", re.IGNORECASE)


def trim_appended_dialogue(
    text: str, markers: Sequence[str] = DEFAULT_DIALOGUE_MARKERS
) -> tuple[str, bool]:
    """Drop everything from the first appended speaker-turn marker onward."""
    if not markers:
        return text, False
    for m in _marker_regex(markers).finditer(text):
        # A marker at offset 0 is the response's own prefix, not an appended turn.
        if m.start() == 0:
            continue
        trimmed = text[: m.start()].rstrip()
        if trimmed:
            return trimmed, True
    return text, False


# Case-insensitive so detection behaves the same before and after the final
# lowercasing step (cleaning must be idempotent).
_CODE_LINE_RE = re.compile(
    r"^\s*(?:def\s+\w+\s*\(|class\s+\w+|import\s+\w|from\s+[\w.]+\s+import\s"
    r"|for\s+.+\s+in\s+.+:|while\s+.+:|return\b|print\s*\("
    r"|[A-Za-z_][\w.\[\]]*\s*=(?!=))",
    re.IGNORECASE,
)


def _replace_fenced(text: str) -> tuple[str, bool]:
    parts = []
    pos = 0
    applied = False
    while True:
        start = text.find("```", pos)
        if start == -1:
            parts.append(text[pos:])
            break
        parts.append(text[pos:start])
        parts.append(CODE_PLACEHOLDER)
        applied = True
        end = text.find("```", start + 3)
        if end == -1:
            break  # unclosed fence: abstract through end of text
        pos = end + 3
    return "".join(parts), applied


def _replace_code_runs(text: str) -> tuple[str, bool]:
    lines = text.split("\n")
    out: list[str] = []
    applied = False
    i = 0
    while i < len(lines):
        if _CODE_LINE_RE.match(lines[i]):
            j = i
            while j < len(lines) and _CODE_LINE_RE.match(lines[j]):
                j += 1
            if j - i >= 2:
                out.append(CODE_PLACEHOLDER)
                applied = True
                i = j
                continue
        out.append(lines[i])
        i += 1
    return "\n".join(out), applied


def abstract_code_blocks(text: str) -> tuple[str, bool]:
    """Replace code blocks (fenced, or runs of >=2 code-shaped lines) with a placeholder."""
    out, fenced = _replace_fenced(text)
    out, runs = _replace_code_runs(out)
    return out, fenced or runs


_PUNCT_RUN_RE = re.compile(r"([%s])\1{2,}" % re.escape(string.punctuation))


def cleanup_punctuation(text: str) -> tuple[str, bool]:
    """Collapse runs of >=3 identical punctuation marks; drop unmatched quotes."""
    out = _PUNCT_RUN_RE.sub(r"\1", text)
    if out.count('"') % 2 == 1:
        if out.startswith('"'):
            out = out[1:]
        elif out.endswith('"'):
            out = out[:-1]
    if out.startswith("“") and "”" not in out:
        out = out[1:]
    if out.endswith("”") and "“" not in out:
        out = out[:-1]
    return out, out != text


def clean_text(text: str, config: CleaningConfig) -> tuple[str, list[CleaningRule]]:
    """Run the full cleaning sequence; returns the text and the rules that fired."""
    applied: list[CleaningRule] = []
    out, fired = strip_extra_info(text, config.extra_info_patterns)
    if fired:
        applied.append(CleaningRule.EXTRA_INFO)
    out, fired = trim_appended_dialogue(out, config.dialogue_markers)
    if fired:
        applied.append(CleaningRule.APPENDED_DIALOGUE)
    out, fired = abstract_code_blocks(out)
    if fired:
        applied.append(CleaningRule.CODE_ABSTRACTION)
    out, fired = cleanup_punctuation(out)
    if fired:
        applied.append(CleaningRule.PUNCTUATION)
    return lowercase_preserving_punct(out), applied


def clean_response(
    resp: TutorResponse, config: CleaningConfig
) -> tuple[TutorResponse, list[CleaningRule]]:
    cleaned, applied = clean_text(resp.raw_text, config)
    return replace(resp, cleaned_text=cleaned), applied


@dataclass
class CleaningReport:
    """Counts of responses touched by each rule, per tutor source."""

    sources: list[str]
    counts: dict[tuple[str, CleaningRule], int]

    def count(self, source: str, rule: CleaningRule) -> int:
        return self.counts.get((source, rule), 0)

    def source_total(self, source: str) -> int:
        return sum(self.count(source, rule) for rule in RULE_ORDER)

    def rule_total(self, rule: CleaningRule) -> int:
        return sum(self.count(source, rule) for source in self.sources)

    @property
    def grand_total(self) -> int:
        return sum(self.counts.values())

    def to_rows(self) -> list[list[str]]:
        """CSV table: one row per rule, one column per tutor source, plus totals."""
        header = ["Category", *self.sources, "Total"]
        rows = [header]
        for rule in RULE_ORDER:
            rows.append(
                [rule.value]
                + [str(self.count(src, rule)) for src in self.sources]
                + [str(self.rule_total(rule))]
            )
        rows.append(
            ["Totals"]
            + [str(self.source_total(src)) for src in self.sources]
            + [str(self.grand_total)]
        )
        return rows


def clean_corpus(corpus: Corpus, config: CleaningConfig) -> tuple[Corpus, CleaningReport]:
    """Clean every response; report counts per (tutor_source, rule)."""
    cleaned_texts: dict[str, str] = {}
    sources: list[str] = []
    counts: dict[tuple[str, CleaningRule], int] = {}
    for resp in corpus.responses():
        cleaned, applied = clean_text(resp.raw_text, config)
        cleaned_texts[resp.response_id] = cleaned
        if resp.tutor_source not in sources:
            sources.append(resp.tutor_source)
        for rule in applied:
            key = (resp.tutor_source, rule)
            counts[key] = counts.get(key, 0) + 1
    return with_cleaned(corpus, cleaned_texts), CleaningReport(sources, counts)


@dataclass
class ModelInput:
    """Assembled classifier input and its token accounting."""

    text: str
    token_count: int
    pruned_turns: int


class BudgetError(ValueError):
    """The response alone does not fit the token budget."""


def whitespace_token_count(text: str) -> int:
    return len(text.split())


def _is_greeting(text: str, lexicon: Sequence[str]) -> bool:
    lowered = text.lower()
    return any(
        re.search(rf"\b{re.escape(phrase)}\b", lowered) for phrase in lexicon
    )


def build_model_input(
    history: Sequence[Turn],
    cleaned: str,
    token_count: Callable[[str], int] = whitespace_token_count,
    budget: int = 512,
    greeting_lexicon: Sequence[str] = DEFAULT_GREETING_LEXICON,
) -> ModelInput:
    """Join history and response under the token budget.

    Over-budget inputs lose history turns one at a time: greeting/small-talk
    turns first (in history order), then the earliest remaining turns. The
    response itself is never pruned; if it alone exceeds the budget, raise.
    """
    turn_texts = [f"{t.speaker}: {t.text}" for t in history]

    def assemble(kept: list[int]) -> str:
        parts = [turn_texts[i] for i in kept] + [cleaned]
        return f" {SEPARATOR} ".join(parts)

    kept = list(range(len(history)))
    text = assemble(kept)
    count = token_count(text)
    if count <= budget:
        return ModelInput(text, count, 0)

    greeting = [i for i in kept if _is_greeting(history[i].text, greeting_lexicon)]
    other = [i for i in kept if i not in greeting]
    prune_order = greeting + other
    for idx in prune_order:
        kept.remove(idx)
        text = assemble(kept)
        count = token_count(text)
        if count <= budget:
            return ModelInput(text, count, len(history) - len(kept))

    raise BudgetError(
        f"response alone exceeds the token budget ({count} > {budget})"
    )
