"""In-context example (shot) selection and assignment.

Three ranking strategies over the train store: averaged question+image
cosine similarity, a seeded random permutation, and a precomputed neighbor
file. The top k*n ranked examples are then spread across k prompts with a
strided partition (rank modulo k), and each prompt lists its shots
worst-rank first so the most similar shot sits next to the test input.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, SampleSkipped
from .store import Store, TestSample

STRATEGIES = ("avg_sim", "random", "precomputed")


@dataclass(frozen=True)
class ShotRanking:
    test_id: str
    ranked_train_ids: tuple[str, ...]
    strategy_tag: str
    scores: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ShotAssignment:
    test_id: str
    prompts: tuple[tuple[str, ...], ...]  # k lists of n train ids, best shot last


def order_by_avg_score(ids: list[str], q_sims: np.ndarray, v_sims: np.ndarray
                       ) -> tuple[list[str], list[float]]:
    """Sort ids by (q_sim + v_sim) / 2 descending, ties lexicographic by id."""
    scores = (np.asarray(q_sims, dtype=np.float64) + np.asarray(v_sims, dtype=np.float64)) / 2.0
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [ids[i] for i in order], [float(scores[i]) for i in order]


def rank_avg_sim(test: TestSample, test_question_emb: np.ndarray, store: Store) -> ShotRanking:
    if not store.train:
        raise InputError("train store is empty")
    if test_question_emb is None:
        raise InputError(f"test sample {test.id!r} has no question embedding")
    ids, q_mat, v_mat = store.train_matrices()
    q_sims = np.clip(q_mat @ test_question_emb, -1.0, 1.0)
    v_sims = np.clip(v_mat @ test.image_emb, -1.0, 1.0)
    ordered_ids, ordered_scores = order_by_avg_score(ids, q_sims, v_sims)
    return ShotRanking(
        test_id=test.id,
        ranked_train_ids=tuple(ordered_ids),
        strategy_tag="avg_sim",
        scores=tuple(ordered_scores),
    )


def rank_random(test_id: str, store: Store, seed: int) -> ShotRanking:
    if not store.train:
        raise InputError("train store is empty")
    ids = store.train_ids_sorted()
    key = f"{seed}:{test_id}:{store.checksum}".encode()
    rng_seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "little")
    perm = np.random.default_rng(rng_seed).permutation(len(ids))
    return ShotRanking(
        test_id=test_id,
        ranked_train_ids=tuple(ids[i] for i in perm),
        strategy_tag="random",
    )


def load_neighbor_file(path: str | Path) -> dict[str, list[str]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"neighbor file not found: {path}")
    neighbors: dict[str, list[str]] = {}
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            neighbors[rec["test_id"]] = list(rec["train_ids"])
    return neighbors


def rank_precomputed(test_id: str, neighbors: dict[str, list[str]], store: Store) -> ShotRanking:
    if test_id not in neighbors:
        raise SampleSkipped(test_id, "no precomputed neighbor entry")
    train_ids = neighbors[test_id]
    for tid in train_ids:
        if tid not in store.train:
            raise InputError(f"neighbor file references unknown train id {tid!r}")
    return ShotRanking(
        test_id=test_id,
        ranked_train_ids=tuple(train_ids),
        strategy_tag="precomputed",
    )


def assign_shots(ranking: ShotRanking, n: int, k: int) -> ShotAssignment:
    if n <= 0 or k <= 0:
        raise InputError(f"n and k must be positive, got n={n} k={k}")
    need = k * n
    have = len(ranking.ranked_train_ids)
    if have < need:
        raise InputError(f"insufficient train examples: need {need}, have {have}")
    prompts = []
    for j in range(k):
        ranks = [j + step * k for step in range(n)]
        prompts.append(tuple(ranking.ranked_train_ids[r] for r in reversed(ranks)))
    return ShotAssignment(test_id=ranking.test_id, prompts=tuple(prompts))
