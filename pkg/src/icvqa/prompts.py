"""Prompt rendering and token-budget enforcement.

A prompt is head + answered context/question/answer blocks (one per shot,
most similar shot last) + the test context/question ending in a bare answer
cue. Rendering is byte-deterministic. When the estimated token count
exceeds the budget, whole shots are dropped from the least-similar end;
the head and the test block are never dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InputError, SampleSkipped
from .shots import ShotAssignment

DEFAULT_MAX_TOKENS = 2048


@dataclass(frozen=True)
class PromptTemplate:
    head: str = "Please answer the question according to the context."
    context_label: str = "Context: "
    question_label: str = "Q: "
    answer_label: str = "A: "
    block_separator: str = "\n===\n"
    caption_joiner: str = ", "

    def __post_init__(self):
        for name in ("context_label", "question_label", "answer_label"):
            if not getattr(self, name):
                raise InputError(f"template {name} must be non-empty")


def estimate_tokens(text: str) -> int:
    """Tokenizer-free estimate: whitespace word count * 1.3, rounded up."""
    return math.ceil(len(text.split()) * 1.3)


def _block(template: PromptTemplate, captions: list[str], question: str,
           answer: str | None) -> str:
    lines = [
        template.context_label + template.caption_joiner.join(captions),
        template.question_label + question,
        template.answer_label + (answer if answer is not None else ""),
    ]
    return "\n".join(lines)


@dataclass
class PromptParts:
    """One prompt split into droppable and fixed pieces, shots best-last."""

    template: PromptTemplate
    shot_blocks: list[str]
    test_block: str

    def render(self) -> str:
        pieces = [self.template.head, *self.shot_blocks, self.test_block]
        return self.template.block_separator.join(pieces)


def build_parts(
    template: PromptTemplate,
    shot_questions: list[str],
    shot_answers: list[str],
    shot_captions: list[list[str]],
    test_question: str,
    test_captions: list[str],
) -> PromptParts:
    if not (len(shot_questions) == len(shot_answers) == len(shot_captions)):
        raise InputError("shots and shot captions are misaligned")
    if not test_captions:
        raise InputError("test captions must be non-empty")
    for caps in shot_captions:
        if not caps:
            raise InputError("every shot needs at least one caption")
    shot_blocks = [
        _block(template, caps, q, a)
        for q, a, caps in zip(shot_questions, shot_answers, shot_captions)
    ]
    test_block = _block(template, test_captions, test_question, None)
    return PromptParts(template=template, shot_blocks=shot_blocks, test_block=test_block)


def enforce_budget(parts: PromptParts, max_tokens: int, token_counter=estimate_tokens,
                   sample_id: str = "") -> tuple[PromptParts, int]:
    """Drop least-similar shots until the rendered prompt fits the budget."""
    trimmed = PromptParts(parts.template, list(parts.shot_blocks), parts.test_block)
    dropped = 0
    while token_counter(trimmed.render()) > max_tokens:
        if not trimmed.shot_blocks:
            raise SampleSkipped(sample_id, "budget")
        trimmed.shot_blocks.pop(0)
        dropped += 1
    return trimmed, dropped


@dataclass
class PromptBundle:
    test_id: str
    prompts: list[str]
    assignment: ShotAssignment
    dropped_shots: list[int] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "test_id": self.test_id,
            "prompts": self.prompts,
            "shot_ids": [list(p) for p in self.assignment.prompts],
            "dropped_shots": self.dropped_shots,
        }
