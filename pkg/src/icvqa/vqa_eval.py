"""Answer normalization and the soft VQA accuracy metric.

A prediction scores min(matching humans / 3, 1) against each of the ten
leave-one-out subsets of nine human answers; the sample accuracy is the
mean over subsets. A simpler direct variant (min over all ten, no
leave-one-out) is available behind a flag. Both compare normalized
strings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import InputError

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)
_ARTICLES = {"a", "an", "the"}
_NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4",
    "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
    "ten": "10",
}


def normalize(answer: str) -> str:
    """Lowercase, strip punctuation and articles, canonicalize zero..ten."""
    text = _PUNCT.sub(" ", answer.lower())
    tokens = [
        _NUMBER_WORDS.get(tok, tok) for tok in text.split() if tok not in _ARTICLES
    ]
    return " ".join(tokens)


@dataclass(frozen=True)
class SampleScore:
    test_id: str
    accuracy: float
    matched_humans: int


def soft_accuracy(prediction: str, humans: list[str], test_id: str = "",
                  direct: bool = False) -> SampleScore:
    """Score one normalized prediction against ten normalized human answers."""
    if len(humans) != 10:
        raise InputError(f"need exactly 10 human answers, got {len(humans)}")
    matches = sum(1 for h in humans if h == prediction)
    if direct:
        acc = min(matches / 3.0, 1.0)
    else:
        # Each leave-one-out subset has `matches` hits, minus one when the
        # held-out answer is itself a hit.
        subset_scores = [
            min((matches - (1 if humans[i] == prediction else 0)) / 3.0, 1.0)
            for i in range(10)
        ]
        acc = sum(subset_scores) / 10.0
    return SampleScore(test_id=test_id, accuracy=acc, matched_humans=matches)


def aggregate(scores: list[SampleScore]) -> float:
    """Headline accuracy: mean per-sample accuracy as a percentage."""
    if not scores:
        raise InputError("no scores to aggregate")
    return 100.0 * sum(s.accuracy for s in scores) / len(scores)


def aggregate_by_type(scores: list[SampleScore], types: dict[str, str]) -> dict[str, float]:
    """Per-question-type accuracy for samples that carry a type label."""
    buckets: dict[str, list[SampleScore]] = {}
    for s in scores:
        qtype = types.get(s.test_id)
        if qtype is not None:
            buckets.setdefault(qtype, []).append(s)
    return {qtype: aggregate(group) for qtype, group in sorted(buckets.items())}
