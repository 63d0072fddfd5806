import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tutorgrade.corpus import Label, Turn, TutorResponse
from tutorgrade.preprocess import (
    CODE_PLACEHOLDER,
    BudgetError,
    CleaningConfig,
    CleaningConfigError,
    CleaningRule,
    abstract_code_blocks,
    build_model_input,
    clean_corpus,
    clean_response,
    clean_text,
    cleanup_punctuation,
    lowercase_preserving_punct,
    strip_extra_info,
    trim_appended_dialogue,
    whitespace_token_count,
)
from tutorgrade.synthetic import CLEANUP_COUNTS, make_cleanup_corpus

from conftest import TRACK, tiny_dialogue


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Check Your Work!", "check your work!"),
        ("2 + 2 = 4?", "2 + 2 = 4?"),
        ("Émile said NO.", "émile said no."),
    ],
)
def test_lowercase_preserving_punct(text, expected):
    assert lowercase_preserving_punct(text) == expected


def test_fenced_block_replaced_with_exact_placeholder():
    out, applied = abstract_code_blocks("try this:\n```python\nx=1\n```\ndone")
    assert out == "try this:\n<<python code>>\ndone"
    assert applied


def test_code_abstraction_noop():
    assert abstract_code_blocks("no code here") == ("no code here", False)


def count_fenced_regions(text):
    """Oracle: number of code regions implied by scanning fence delimiters."""
    fences = text.count("```")
    return fences // 2 + fences % 2  # an unclosed trailing fence is one region


@pytest.mark.parametrize(
    "text",
    [
        "a\n```\nx=1\n```\nmid\n```js\ny\n```\nend",
        "```python\nfoo\n``` and ```\nbar\n```",
        "starts fine\n```unclosed\nnever ends",
    ],
)
def test_all_fenced_regions_replaced(text):
    out, applied = abstract_code_blocks(text)
    assert applied
    assert out.count(CODE_PLACEHOLDER) >= count_fenced_regions(text)
    assert "```" not in out


def test_indented_code_run_abstracted():
    text = "see below\n    x = 1\n    y = x + 2\nthanks"
    out, applied = abstract_code_blocks(text)
    assert applied
    assert out == f"see below\n{CODE_PLACEHOLDER}\nthanks"


def test_single_code_like_line_kept():
    text = "the equation is\nx = 4"
    assert abstract_code_blocks(text) == (text, False)


@pytest.mark.parametrize(
    "text,expected,applied",
    [
        ("good job. Student: what next?", "good job.", True),
        ("the answer is 12.", "the answer is 12.", False),
        ("ok. Tutor: and then...", "ok.", True),
        ("first line\nuser: are you sure?", "first line", True),
        ("Tutor: this is my whole reply", "Tutor: this is my whole reply", False),
        ("tell the student: try again", "tell the student: try again", False),
    ],
)
def test_trim_appended_dialogue(text, expected, applied):
    assert trim_appended_dialogue(text) == (expected, applied)


def locate_and_truncate(text, markers):
    """Oracle: truncate at the first marker found at a line/sentence boundary."""
    best = None
    lowered = text.lower()
    for m in markers:
        start = 0
        while True:
            pos = lowered.find(m, start)
            if pos == -1:
                break
            before = text[:pos].rstrip()
            if pos > 0 and (not before or before[-1] in ".!?\n"):
                best = pos if best is None else min(best, pos)
                break
            start = pos + 1
    if best is None:
        return text, False
    return text[:best].rstrip(), True


@pytest.mark.parametrize(
    "text",
    [
        "good job. Student: what next?",
        "ok. Tutor: and then...",
        "well done!\nstudent: thanks",
        "nothing to trim here",
        "6 is right? user: cool",
    ],
)
def test_trim_matches_independent_oracle(text):
    markers = ("student:", "tutor:", "user:")
    assert trim_appended_dialogue(text, markers) == locate_and_truncate(text, markers)


def test_strip_extra_info():
    out, applied = strip_extra_info("[meta: generated] check step 2", [r"\[meta:[^\]]*\]"])
    assert (out, applied) == ("check step 2", True)
    assert strip_extra_info("check step 2", [r"\[meta:[^\]]*\]"]) == ("check step 2", False)
    assert strip_extra_info("anything", []) == ("anything", False)


def test_strip_extra_info_bad_pattern():
    with pytest.raises(CleaningConfigError):
        strip_extra_info("text", ["[unclosed"])


@pytest.mark.parametrize(
    "text,expected,applied",
    [
        ('"great work', "great work", True),
        ("well done!!!!", "well done!", True),
        ("fine.", "fine.", False),
        ("he said \"sure\" twice", 'he said "sure" twice', False),
        ("wait....... what", "wait. what", True),
        ("keep it up!!", "keep it up!!", False),
    ],
)
def test_cleanup_punctuation(text, expected, applied):
    assert cleanup_punctuation(text) == (expected, applied)


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=60))
def test_cleanup_punctuation_oracle_properties(text):
    out, _ = cleanup_punctuation(text)
    # Run-length oracle: no 3+ run of the same punctuation mark survives.
    assert not re.search(r'([!-/:-@\[-`{-~])\1{2}', out)
    # Quote-balance oracle: an odd quote count never starts and ends the text.
    if out.count('"') % 2 == 1:
        assert not (out.startswith('"') or out.endswith('"'))


def test_clean_response_untouched_is_lowercased():
    resp = TutorResponse("r1", "GPT-4", "Great Effort, keep going!", labels={TRACK: Label.NO})
    cleaned, applied = clean_response(resp, CleaningConfig())
    assert cleaned.cleaned_text == "great effort, keep going!"
    assert applied == []


def test_clean_response_composes_sub_operations():
    raw = "Run this:\n```python\nx=1\n```\nlooks wrong. Student: why?"
    config = CleaningConfig()
    # Oracle: apply the published order by hand.
    by_hand, _ = strip_extra_info(raw, config.extra_info_patterns)
    by_hand, _ = trim_appended_dialogue(by_hand, config.dialogue_markers)
    by_hand, _ = abstract_code_blocks(by_hand)
    by_hand, _ = cleanup_punctuation(by_hand)
    by_hand = lowercase_preserving_punct(by_hand)

    resp = TutorResponse("r1", "Phi3", raw, labels={TRACK: Label.YES})
    cleaned, applied = clean_response(resp, config)
    assert cleaned.cleaned_text == by_hand
    assert applied == [CleaningRule.APPENDED_DIALOGUE, CleaningRule.CODE_ABSTRACTION]


def test_cleaning_report_matches_table_shape():
    corpus, config = make_cleanup_corpus()
    _, report = clean_corpus(corpus, config)
    totals = {source: report.source_total(source) for source in report.sources}
    assert totals == {
        "Phi3": 25,
        "Mistral": 2,
        "Llama-3.1-8B": 1,
        "Llama-3.1-405B": 11,
        "GPT-4": 1,
    }
    assert report.grand_total == 40


def test_cleaning_report_consistent_with_per_response_rules():
    corpus, config = make_cleanup_corpus()
    cleaned, report = clean_corpus(corpus, config)
    recount = {}
    for resp in corpus.responses():
        _, applied = clean_text(resp.raw_text, config)
        for rule in applied:
            key = (resp.tutor_source, rule)
            recount[key] = recount.get(key, 0) + 1
    assert recount == report.counts
    expected_rule_totals = {
        rule: sum(counts.get(rule, 0) for counts in CLEANUP_COUNTS.values())
        for rule in CleaningRule
    }
    for rule in CleaningRule:
        assert report.rule_total(rule) == expected_rule_totals[rule]
    # both margins sum back to the grand total
    assert sum(report.source_total(s) for s in report.sources) == report.grand_total
    assert sum(report.rule_total(r) for r in CleaningRule) == report.grand_total


TRICKY_TEXTS = [
    'she said """never""" again!!!!',
    "ok. Student: next?\n```python\nx=1\n```",
    '"unbalanced from the start',
    "x = 1\ny = 2\nz = x + y",
    "Great. tutor: follow up...... done",
    "Émile!!! ``` code ``` trailing```",
]


@pytest.mark.parametrize("text", TRICKY_TEXTS)
def test_clean_text_idempotent(text):
    config = CleaningConfig(extra_info_patterns=[r"(?i)\[meta:[^\]]*\]"])
    once, _ = clean_text(text, config)
    twice, _ = clean_text(once, config)
    assert twice == once


@settings(max_examples=150, deadline=None)
@given(st.text(max_size=80))
def test_clean_text_idempotent_property(text):
    config = CleaningConfig()
    once, _ = clean_text(text, config)
    twice, _ = clean_text(once, config)
    assert twice == once


def test_build_model_input_under_budget():
    history = [Turn("student", "two plus two is five"), Turn("tutor", "check again")]
    mi = build_model_input(history, "look at your addition", budget=512)
    assert mi.pruned_turns == 0
    assert mi.token_count == whitespace_token_count(mi.text)
    assert mi.text.endswith("look at your addition")


def test_build_model_input_prunes_greetings_first():
    history = [
        Turn("student", "hello there how are you today"),
        Turn("tutor", "hi nice to meet you"),
        Turn("student", "i think the answer is twelve"),
        Turn("tutor", "walk me through your steps"),
    ]
    response = "check your subtraction in step two"
    budget = 22
    mi = build_model_input(history, response, budget=budget)
    assert mi.pruned_turns == 2
    assert "hello" not in mi.text and "nice to meet" not in mi.text
    assert "twelve" in mi.text and "walk me through" in mi.text
    # Oracle: re-run the pruning by hand, one greeting turn at a time.
    kept = history[2:]
    text = " [SEP] ".join([f"{t.speaker}: {t.text}" for t in kept] + [response])
    assert mi.text == text
    assert mi.token_count == whitespace_token_count(text) <= budget


def test_build_model_input_response_alone_over_budget():
    history = [Turn("student", "short")]
    with pytest.raises(BudgetError):
        build_model_input(history, " ".join(["word"] * 40), budget=10)


@settings(max_examples=60, deadline=None)
@given(st.integers(6, 40), st.integers(0, 6), st.integers(0, 25))
def test_budget_always_respected(budget, n_turns, extra_tokens):
    rng = random.Random(budget * 1000 + n_turns * 31 + extra_tokens)
    history = [
        Turn("student", " ".join(f"w{rng.randrange(9)}" for _ in range(rng.randint(1, 8))))
        for _ in range(n_turns)
    ]
    response = " ".join(["tok"] * (1 + extra_tokens % (budget - 1)))
    mi = build_model_input(history, response, budget=budget)
    assert mi.token_count <= budget


def test_cleaning_config_file_round_trip(tmp_path):
    config = CleaningConfig(extra_info_patterns=[r"\[x\]"], budget=256, train_truncation=128)
    path = tmp_path / "cleaning.json"
    config.to_file(path)
    assert CleaningConfig.from_file(path) == config


def test_cleaning_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "cleaning.json"
    path.write_text('{"budget": 10, "mystery": 1}', encoding="utf-8")
    with pytest.raises(CleaningConfigError, match="unknown config keys"):
        CleaningConfig.from_file(path)


def test_cleaning_config_rejects_bad_pattern():
    with pytest.raises(CleaningConfigError):
        CleaningConfig(extra_info_patterns=["[broken"])


def test_clean_corpus_attaches_cleaned_text():
    d = tiny_dialogue("d0", [Label.YES], text="Watch Out!!!!")
    from tutorgrade.corpus import Corpus

    cleaned, report = clean_corpus(Corpus([d], TRACK), CleaningConfig())
    resp = next(cleaned.responses())
    assert resp.cleaned_text == "watch out!"
    assert report.grand_total == 1
