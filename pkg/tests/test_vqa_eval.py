import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icvqa.errors import InputError
from icvqa.vqa_eval import SampleScore, aggregate, aggregate_by_type, normalize, soft_accuracy


def subset_enumeration_oracle(prediction, humans):
    """Independent oracle: explicitly enumerate the 10 leave-one-out subsets."""
    scores = []
    for i in range(10):
        subset = humans[:i] + humans[i + 1:]
        matches = sum(1 for h in subset if h == prediction)
        scores.append(min(matches / 3.0, 1.0))
    return sum(scores) / 10.0


class TestNormalize:
    def test_article_punctuation_case(self):
        assert normalize("The Dog.") == "dog"

    def test_number_word(self):
        assert normalize("two") == "2"

    def test_fixed_point(self):
        assert normalize("dog") == "dog"

    def test_multi_word(self):
        assert normalize("A red, shiny apple!") == "red shiny apple"

    def test_collapses_whitespace(self):
        assert normalize("  hot   dog  ") == "hot dog"

    @settings(max_examples=300)
    @given(st.text(max_size=40))
    def test_idempotent_on_fuzz_corpus(self, s):
        once = normalize(s)
        assert normalize(once) == once


class TestSoftAccuracy:
    def test_no_matches(self):
        assert soft_accuracy("x", ["y"] * 10).accuracy == 0.0

    def test_all_match(self):
        assert soft_accuracy("y", ["y"] * 10).accuracy == 1.0

    def test_three_matches_gives_point_nine(self):
        humans = ["y"] * 3 + ["z"] * 7
        score = soft_accuracy("y", humans)
        assert score.accuracy == pytest.approx(0.9)
        assert score.matched_humans == 3

    def test_closed_form_all_match_counts(self):
        for matches in range(11):
            humans = ["y"] * matches + [f"z{i}" for i in range(10 - matches)]
            got = soft_accuracy("y", humans).accuracy
            assert got == pytest.approx(subset_enumeration_oracle("y", humans))

    def test_wrong_human_count_rejected(self):
        with pytest.raises(InputError, match="10 human answers"):
            soft_accuracy("y", ["y"] * 9)

    def test_permutation_invariant(self):
        rng = random.Random(5)
        humans = ["a", "a", "b", "c", "a", "d", "b", "e", "a", "f"]
        base = soft_accuracy("a", humans).accuracy
        for _ in range(50):
            shuffled = humans[:]
            rng.shuffle(shuffled)
            assert soft_accuracy("a", shuffled).accuracy == pytest.approx(base)

    def test_direct_variant(self):
        humans = ["y"] * 2 + ["z"] * 8
        assert soft_accuracy("y", humans, direct=True).accuracy == pytest.approx(2 / 3)


class TestAggregate:
    def test_mean_of_two(self):
        scores = [SampleScore("a", 1.0, 10), SampleScore("b", 0.0, 0)]
        assert aggregate(scores) == pytest.approx(50.0)

    def test_single(self):
        assert aggregate([SampleScore("a", 0.9, 3)]) == pytest.approx(90.0)

    def test_hand_mean_of_three(self):
        scores = [SampleScore(i, v, 0) for i, v in zip("abc", [0.9, 0.6, 0.3])]
        assert aggregate(scores) == pytest.approx(60.0)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            aggregate([])

    def test_permutation_invariant(self):
        rng = random.Random(2)
        scores = [SampleScore(str(i), rng.random(), 0) for i in range(20)]
        base = aggregate(scores)
        shuffled = scores[:]
        rng.shuffle(shuffled)
        assert aggregate(shuffled) == pytest.approx(base)

    def test_by_type_breakdown(self):
        scores = [SampleScore("a", 1.0, 10), SampleScore("b", 0.5, 2),
                  SampleScore("c", 0.0, 0)]
        types = {"a": "color", "b": "color", "c": "count"}
        got = aggregate_by_type(scores, types)
        assert got == {"color": pytest.approx(75.0), "count": pytest.approx(0.0)}
