"""Few-shot in-context KB-VQA orchestration engine."""

__version__ = "0.1.0"

from .captions import RankedCaptions, rank_captions
from .ensemble import extract_answer, majority_vote, run_sample
from .shots import assign_shots, rank_avg_sim, rank_precomputed, rank_random
from .store import Store, cosine, ingest
from .vqa_eval import aggregate, normalize, soft_accuracy

__all__ = [
    "RankedCaptions",
    "Store",
    "aggregate",
    "assign_shots",
    "cosine",
    "extract_answer",
    "ingest",
    "majority_vote",
    "normalize",
    "rank_avg_sim",
    "rank_captions",
    "rank_precomputed",
    "rank_random",
    "run_sample",
    "soft_accuracy",
]
