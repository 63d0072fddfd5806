import itertools
import random
from collections import Counter

import numpy as np
import pytest

from tutorgrade.classify import PredictionRow, PredictionSet
from tutorgrade.corpus import Label
from tutorgrade.ensemble import (
    EnsembleError,
    EnsembleResult,
    compare_to_members,
    hard_vote,
)
from tutorgrade.metrics import compute_report


def probs_for(label, tilt=0.0):
    """A valid probability vector whose argmax is `label`."""
    base = np.full(3, (1.0 - 0.6 - tilt) / 2)
    base[int(label)] = 0.6 + tilt
    return tuple(float(p) for p in base)


def member(model_id, labelled_rows):
    rows = [
        PredictionRow(sid, label, probs if probs else probs_for(label))
        for sid, label, probs in labelled_rows
    ]
    return PredictionSet(model_id, rows)


def test_strict_plurality():
    votes = [Label.YES] * 6 + [Label.NO] * 3 + [Label.TO_SOME_EXTENT]
    members = [member(f, [("s1", v, None)]) for f, v in enumerate(votes)]
    result = hard_vote(members)
    row = result.rows[0]
    assert row.label is Label.YES
    assert not row.tie_broken
    assert row.vote_counts == (3, 1, 6)


def test_tie_resolved_by_mean_softmax():
    # 5 votes No vs 5 votes Yes; member probabilities average to (0.40, 0.15, 0.45).
    no_probs = (0.60, 0.15, 0.25)
    yes_probs = (0.20, 0.15, 0.65)
    members = [member(f, [("s1", Label.NO, no_probs)]) for f in range(5)]
    members += [member(5 + f, [("s1", Label.YES, yes_probs)]) for f in range(5)]
    result = hard_vote(members)
    row = result.rows[0]
    assert row.tie_broken
    assert row.mean_probs == pytest.approx((0.40, 0.15, 0.45), abs=1e-12)
    assert row.label is Label.YES


def test_single_member_is_identity():
    rows = [
        ("a", Label.NO, None),
        ("b", Label.TO_SOME_EXTENT, None),
        ("c", Label.YES, None),
    ]
    single = member(0, rows)
    result = hard_vote([single])
    assert [r.label for r in result.rows] == [r.label for r in sorted(single.rows, key=lambda r: r.sample_id)]
    assert all(not r.tie_broken for r in result.rows)


def test_unanimity():
    members = [member(f, [("s", Label.TO_SOME_EXTENT, None)]) for f in range(7)]
    row = hard_vote(members).rows[0]
    assert row.label is Label.TO_SOME_EXTENT
    assert not row.tie_broken
    assert row.vote_counts == (0, 7, 0)


def test_permutation_invariance():
    rng = random.Random(0)
    members = []
    for f in range(6):
        rows = [
            (f"s{i}", Label(rng.randrange(3)), probs_for(Label(rng.randrange(3)), 0.01 * f))
            for i in range(10)
        ]
        # keep probs consistent with the voted label
        rows = [(sid, label, probs_for(label, 0.01 * f)) for sid, label, _ in rows]
        members.append(member(f, rows))
    baseline = hard_vote(members)
    for _ in range(5):
        shuffled = members[:]
        rng.shuffle(shuffled)
        again = hard_vote(shuffled)
        assert [r.label for r in again.rows] == [r.label for r in baseline.rows]
        assert [r.tie_broken for r in again.rows] == [r.tie_broken for r in baseline.rows]


def brute_force_vote(labels, prob_vectors):
    """Oracle: mode with mean-softmax tie-break, argmax ties to lowest index."""
    counts = Counter(int(l) for l in labels)
    top = max(counts.values())
    leaders = sorted(c for c, v in counts.items() if v == top)
    if len(leaders) == 1:
        return leaders[0], False
    mean = [sum(p[c] for p in prob_vectors) / len(prob_vectors) for c in range(3)]
    best = max(mean)
    return min(c for c in range(3) if mean[c] == best), True


def exhaustive_check(n):
    prob_table = {
        (f, c): probs_for(Label(c), tilt=0.02 * f) for f in range(n) for c in range(3)
    }
    mismatches = 0
    for pattern in itertools.product(range(3), repeat=n):
        members = [
            member(f, [("s", Label(c), prob_table[(f, c)])]) for f, c in enumerate(pattern)
        ]
        row = hard_vote(members).rows[0]
        vectors = [prob_table[(f, c)] for f, c in enumerate(pattern)]
        want_label, want_tie = brute_force_vote([Label(c) for c in pattern], vectors)
        if (int(row.label), row.tie_broken) != (want_label, want_tie):
            mismatches += 1
    return mismatches


@pytest.mark.parametrize("n", [1, 2, 3])
def test_exhaustive_matches_brute_force(n):
    assert exhaustive_check(n) == 0


def test_vote_counts_and_mean_probs_invariants():
    rng = random.Random(3)
    members = []
    for f in range(9):
        rows = []
        for i in range(20):
            label = Label(rng.randrange(3))
            rows.append((f"s{i:02d}", label, probs_for(label, 0.03 * (f % 4))))
        members.append(member(f, rows))
    result = hard_vote(members)
    assert result.n_models == 9
    for row in result.rows:
        assert sum(row.vote_counts) == 9
        assert sum(row.mean_probs) == pytest.approx(1.0, abs=1e-9)


def test_mismatched_samples_rejected():
    a = member(0, [("s1", Label.NO, None)])
    b = member(1, [("s2", Label.NO, None)])
    with pytest.raises(EnsembleError):
        hard_vote([a, b])
    with pytest.raises(EnsembleError):
        hard_vote([])


def test_result_csv_round_trip(tmp_path):
    members = [member(f, [("a", Label.YES, None), ("b", Label.NO, None)]) for f in range(4)]
    result = hard_vote(members)
    path = tmp_path / "ensemble.csv"
    result.save_csv(path)
    loaded = EnsembleResult.load_csv(path)
    assert loaded == result


def test_compare_identical_members_delta_zero():
    rows = [(f"s{i}", Label(i % 3), None) for i in range(9)]
    members = [member(f, rows) for f in range(5)]
    result = hard_vote(members)
    gold = {f"s{i}": Label(i % 3) for i in range(9)}
    comparison = compare_to_members(result, members, gold)
    assert comparison.delta_vs_mean_member == pytest.approx(0.0, abs=1e-12)


def test_compare_member_scores_match_direct_metrics():
    rng = random.Random(9)
    gold = {f"s{i}": Label(rng.randrange(3)) for i in range(30)}
    members = []
    for f in range(10):
        rows = []
        for sid, g in gold.items():
            label = g if (f == 0 or rng.random() > 0.5) else Label(rng.randrange(3))
            rows.append((sid, label, probs_for(label)))
        members.append(member(f, rows))
    result = hard_vote(members)
    comparison = compare_to_members(result, members, gold)
    # Oracle: score each member with the metrics module directly.
    for predictions, reported in zip(members, comparison.member_macro_f1):
        g = [gold[r.sample_id] for r in predictions.rows]
        p = [r.label for r in predictions.rows]
        assert reported == compute_report(g, p).macro_f1
    assert comparison.member_macro_f1[0] == 1.0


def test_compare_requires_gold_coverage():
    members = [member(0, [("s1", Label.NO, None)])]
    result = hard_vote(members)
    with pytest.raises(EnsembleError):
        compare_to_members(result, members, {})
