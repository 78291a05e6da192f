"""Question-informative caption ranking.

Candidate captions are scored by cosine similarity against the image
embedding, deduplicated on byte-equal text (highest score wins), and the
top-m kept. Ties break by original candidate index so rankings are stable
across platforms and runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .store import cosine


@dataclass(frozen=True)
class RankedCaptions:
    sample_id: str
    captions: tuple[tuple[str, float], ...]  # (text, score), scores non-increasing
    m: int

    def texts(self) -> list[str]:
        return [t for t, _ in self.captions]


def rank_captions(
    candidates: list[tuple[str, np.ndarray]],
    image_emb: np.ndarray,
    m: int,
    sample_id: str = "",
) -> RankedCaptions:
    if m <= 0:
        raise InputError(f"m must be positive, got {m}")
    if not candidates:
        raise InputError(f"no candidate captions for {sample_id!r}")

    scored = [
        (text, cosine(emb, image_emb), idx) for idx, (text, emb) in enumerate(candidates)
    ]
    # Dedup on exact text, keeping the best-scoring copy (earliest index on ties).
    best: dict[str, tuple[str, float, int]] = {}
    for entry in scored:
        text, score, idx = entry
        kept = best.get(text)
        if kept is None or score > kept[1]:
            best[text] = entry
    ordered = sorted(best.values(), key=lambda e: (-e[1], e[2]))
    top = ordered[: min(m, len(ordered))]
    return RankedCaptions(
        sample_id=sample_id,
        captions=tuple((text, score) for text, score, _ in top),
        m=m,
    )


def prefix_captions(captions: tuple[str, ...], m: int) -> list[str]:
    """Prefix of a pre-ranked caption list; trusts the stored order."""
    if m <= 0:
        raise InputError(f"m must be positive, got {m}")
    return list(captions[:m])
