"""Multi-query ensemble: fan out the k prompts, vote on the answers.

Generations are cut at the first stop marker, normalized, and majority
voted. Ties go to the answer whose first occurrence has the lowest prompt
index (prompt 0 holds the most similar shots). Failed queries are excluded
from the vote; the sample only fails when every query fails.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backend import DEFAULT_STOP_SEQUENCES, Backend, CompletionRequest, DecodeParams
from .errors import BackendError, InputError
from .prompts import PromptBundle
from .vqa_eval import normalize


def extract_answer(generation: str, stop_markers=DEFAULT_STOP_SEQUENCES) -> str:
    cut = len(generation)
    for marker in stop_markers:
        pos = generation.find(marker)
        if pos != -1:
            cut = min(cut, pos)
    return generation[:cut].strip()


def majority_vote(answers: list[str]) -> str:
    if not answers:
        raise InputError("majority_vote needs at least one answer")
    counts = Counter(answers)
    best = max(counts.values())
    # First occurrence wins ties; answers are ordered by prompt index.
    for answer in answers:
        if counts[answer] == best:
            return answer
    raise AssertionError("unreachable")


@dataclass
class PredictionRecord:
    test_id: str
    raw_generations: list[str | None]  # None where the query failed
    extracted: list[str]
    normalized: list[str]
    voted_answer: str | None
    vote_counts: dict[str, int]
    failed_queries: int
    failed: bool = False
    dropped_shots: list[int] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "test_id": self.test_id,
            "raw_generations": self.raw_generations,
            "extracted": self.extracted,
            "normalized": self.normalized,
            "voted_answer": self.voted_answer,
            "vote_counts": dict(sorted(self.vote_counts.items())),
            "failed_queries": self.failed_queries,
            "failed": self.failed,
            "dropped_shots": self.dropped_shots,
        }


def run_sample(bundle: PromptBundle, backend: Backend, params: DecodeParams,
               normalizer=normalize, executor: ThreadPoolExecutor | None = None
               ) -> PredictionRecord:
    """Issue the k queries (concurrently when an executor is given) and vote."""
    requests = [
        CompletionRequest(
            correlation_id=f"{bundle.test_id}#{idx}", prompt=prompt, params=params
        )
        for idx, prompt in enumerate(bundle.prompts)
    ]

    def query(req: CompletionRequest) -> str | None:
        try:
            return backend.complete(req).text
        except BackendError:
            return None

    if executor is not None:
        # Futures are collected in prompt order, so arrival order is irrelevant.
        raw = [f.result() for f in [executor.submit(query, r) for r in requests]]
    else:
        raw = [query(r) for r in requests]

    succeeded = [(idx, text) for idx, text in enumerate(raw) if text is not None]
    extracted = [extract_answer(text, params.stop_sequences) for _, text in succeeded]
    normalized = [normalizer(ans) for ans in extracted]
    failed_queries = len(raw) - len(succeeded)
    if normalized:
        voted = majority_vote(normalized)
        counts = dict(Counter(normalized))
        failed = False
    else:
        voted, counts, failed = None, {}, True
    return PredictionRecord(
        test_id=bundle.test_id,
        raw_generations=raw,
        extracted=extracted,
        normalized=normalized,
        voted_answer=voted,
        vote_counts=counts,
        failed_queries=failed_queries,
        failed=failed,
        dropped_shots=list(bundle.dropped_shots),
    )
