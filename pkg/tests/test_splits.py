import math
import random

import pytest

from conceptevo.kb import load_kb
from conceptevo.retrieval import LearningProblem
from conceptevo.splits import (SplitTable, best_split, calculate_splits, candidate_thresholds,
                               closest_split, entropy, information_gain)
from oracles import exhaustive_best_split, random_split_instance


def _ages(pos, neg):
    lines = ["dataprop age numeric"]
    names = {}
    for k, v in enumerate(list(pos) + list(neg)):
        names[f"e{k}"] = v
        lines.append(f"data e{k} age {v}")
    kb = load_kb("\n".join(lines) + "\n")
    keys = list(names)
    return kb, LearningProblem(keys[:len(pos)], keys[len(pos):])


def test_entropy_values():
    assert entropy(4, 3) == pytest.approx(0.98523, abs=1e-5)
    assert entropy(4, 3) == pytest.approx(-(4 / 7) * math.log2(4 / 7) - (3 / 7) * math.log2(3 / 7))
    assert entropy(5, 0) == 0
    assert entropy(2, 2) == 1.0
    with pytest.raises(ValueError):
        entropy(0, 0)


@pytest.mark.parametrize("p, n", [(1, 2), (3, 7), (10, 1)])
def test_entropy_symmetric(p, n):
    assert entropy(p, n) == pytest.approx(entropy(n, p))
    assert 0 <= entropy(p, n) <= 1


def test_information_gain():
    kb, e = _ages([10, 20], [30, 40])
    assert information_gain(e, "age", 25, kb) == pytest.approx(1.0)
    assert information_gain(e, "age", 5, kb) == 0


def test_information_gain_fixture(mini, age_problem):
    assert information_gain(age_problem, "age", 39, mini) == pytest.approx(1.0)


def test_best_split():
    kb, e = _ages([10, 20], [30, 40])
    s = best_split(e, "age", kb)
    assert (s.threshold, s.gain) == (25, pytest.approx(1.0))
    assert s.left == LearningProblem({"e0", "e1"}, ()) and s.right == LearningProblem((), {"e2", "e3"})
    kb, e = _ages([1, 5, 9], [])
    assert best_split(e, "age", kb) is None


def test_best_split_fixture(mini, age_problem):
    assert best_split(age_problem, "age", mini).threshold == 39


def test_examples_without_values_are_ignored():
    kb = load_kb("dataprop d numeric\nclass A\ntype z A\ndata a d 1\ndata b d 5\n")
    e = LearningProblem({"a", "z"}, {"b"})
    s = best_split(e, "d", kb)
    assert s.threshold == 3 and s.gain == pytest.approx(1.0)
    assert "z" not in s.left.positives | s.right.positives


def test_wrong_role_kind(mini, age_problem):
    with pytest.raises(Exception):
        best_split(age_problem, "married", mini)
    with pytest.raises(KeyError):
        best_split(age_problem, "height", mini)


def test_ties_go_to_smallest():
    # + - + - : midpoints 1.5 and 3.5 tie, 2.5 is worse.
    kb, e = _ages([1, 3], [2, 4])
    gains = [information_gain(e, "age", t, kb) for t in (1.5, 2.5, 3.5)]
    assert gains[0] == pytest.approx(gains[2]) and gains[1] < gains[0]
    assert best_split(e, "age", kb).threshold == 1.5


def test_pruning_skips_pure_runs():
    kb, e = _ages([1, 2, 3], [7, 8, 9])
    assert candidate_thresholds(e, "age", kb) == [5.0]
    assert len(candidate_thresholds(e, "age", kb, prune=False)) == 5


def test_calculate_splits_fixture(mini, age_problem):
    table = calculate_splits(mini, age_problem, 10)
    assert table.get("age") == [39]
    assert table.k == 10


def test_calculate_splits_no_numeric():
    kb = load_kb("class A\ntype a A\ntype b A\n")
    assert calculate_splits(kb, LearningProblem({"a"}, {"b"}), 5).thresholds == {}


def test_calculate_splits_respects_k():
    kb, e = _ages([1, 3, 5, 7, 9, 11], [2, 4, 6, 8, 10, 12])
    for k in (1, 2, 3, 20):
        ts = calculate_splits(kb, e, k).get("age")
        assert 1 <= len(ts) <= k
        assert ts == sorted(set(ts))
    assert calculate_splits(kb, e, 1).get("age") == [best_split(e, "age", kb).threshold]


def test_split_table_json():
    t = SplitTable(3, {"age": [25.0, 39.0]})
    assert SplitTable.from_json(t.to_json()) == t


def test_closest_split():
    t = SplitTable(10, {"age": [25, 39]})
    assert closest_split(t, "age", 42) == 39
    assert closest_split(t, "age", 32) == 25
    assert closest_split(SplitTable(10, {"age": [39]}), "age", 5) == 39
    with pytest.raises(KeyError):
        closest_split(t, "height", 3)


def test_best_split_matches_exhaustive():
    rng = random.Random(7)
    for _ in range(500):
        kb, e, props = random_split_instance(rng)
        for d in props:
            got = best_split(e, d, kb)
            want = exhaustive_best_split(kb, e, d)
            if want is None:
                assert got is None
            else:
                assert got.threshold == want[0]
                assert got.gain == pytest.approx(want[1], abs=1e-9)


def test_pruned_and_full_agree():
    rng = random.Random(11)
    for _ in range(300):
        kb, e, props = random_split_instance(rng)
        for d in props:
            a, b = best_split(e, d, kb), best_split(e, d, kb, prune=False)
            assert (a is None) == (b is None)
            if a:
                assert a.threshold == b.threshold


def test_candidates_bounded_by_twice_minority():
    # Each class-boundary midpoint touches a value held by a minority example,
    # and every such value has two neighbours.
    rng = random.Random(13)
    for _ in range(500):
        kb, e, props = random_split_instance(rng, multi_valued=False)
        for d in props:
            held = [x for x in e.positives | e.negatives if (x, d) in kb.numeric_values]
            minority = min(sum(x in e.positives for x in held), sum(x in e.negatives for x in held))
            assert len(candidate_thresholds(e, d, kb)) <= 2 * minority
