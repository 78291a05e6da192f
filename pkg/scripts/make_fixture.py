#!/usr/bin/env python3
"""Generate the deterministic 10-sample fixture used by the test suite.

Writes train/test JSONL, an embedding pack, a precomputed-neighbor file,
and a lookup table for the mock backend. Vectors are seeded from their
emb_id, so regeneration is byte-stable. Run from the repo root:

    python3 scripts/make_fixture.py [--out tests/fixtures]
"""

from __future__ import annotations

import argparse
import hashlib
import json
from pathlib import Path

import numpy as np

DIM = 8
N_TRAIN = 30
N_TEST = 10
N_CANDIDATES = 12  # candidate captions per test sample
N_TRAIN_CAPTIONS = 12  # pre-ranked captions per train example

ANIMALS = [
    "dog", "cat", "horse", "zebra", "lion", "bear", "owl", "fox",
    "crab", "whale", "goat", "mole", "wolf", "duck", "swan",
]


def vec(emb_id: str) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(emb_id.encode()).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    # Deliberately unnormalized so ingest exercises re-normalization.
    return rng.normal(0.0, 1.0, DIM).astype("<f4") * rng.uniform(0.5, 3.0)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="tests/fixtures")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    vectors: dict[str, np.ndarray] = {}

    def register(emb_id: str) -> str:
        vectors[emb_id] = vec(emb_id)
        return emb_id

    train_records = []
    for i in range(N_TRAIN):
        tid = f"tr{i:02d}"
        animal = ANIMALS[i % len(ANIMALS)]
        train_records.append({
            "id": tid,
            "question": f"what animal is example {i}?",
            "answer": animal,
            "captions": [
                f"a {animal} shown from angle {j} in scene {i}"
                for j in range(N_TRAIN_CAPTIONS)
            ],
            "generic_captions": [f"an outdoor scene {i}", f"a picture of nature {i}"],
            "question_emb_id": register(f"q:{tid}:0"),
            "image_emb_id": register(f"img:{tid}:0"),
        })

    test_records = []
    lookup_table = {}
    for i in range(N_TEST):
        tid = f"te{i:02d}"
        animal = ANIMALS[(i * 3) % len(ANIMALS)]
        question = f"what animal appears in test scene {i}?"
        # 6 of 10 humans agree with the lookup answer, 4 dissent.
        humans = [animal] * 6 + ["bird", "fish", animal + "s", "unknown"]
        lookup_table[question] = animal
        test_records.append({
            "id": tid,
            "question": question,
            "question_emb_id": register(f"q:{tid}:0"),
            "image_emb_id": register(f"img:{tid}:0"),
            "caption_entries": [
                {
                    "text": f"candidate caption {j} mentioning a {animal} ({tid})",
                    "emb_id": register(f"cap:{tid}:{j}"),
                }
                for j in range(N_CANDIDATES)
            ],
            "human_answers": humans,
            "generic_captions": [f"a generic scene {i}", f"some objects {i}"],
            "question_type": "animal" if i % 2 == 0 else "other",
        })

    with (out / "train.jsonl").open("w") as fh:
        for rec in train_records:
            fh.write(json.dumps(rec) + "\n")
    with (out / "test.jsonl").open("w") as fh:
        for rec in test_records:
            fh.write(json.dumps(rec) + "\n")

    ids = sorted(vectors)
    matrix = np.stack([vectors[i] for i in ids])
    bin_path = out / "embeddings.bin"
    matrix.astype("<f4").tofile(bin_path)
    (out / "embeddings.index.json").write_text(
        json.dumps({i: row for row, i in enumerate(ids)}, indent=0)
    )
    (out / "embeddings.json").write_text(json.dumps({
        "dim": DIM,
        "count": len(ids),
        "model_tag": "fixture-hash-v1",
        "checksum": "sha256:" + hashlib.sha256(bin_path.read_bytes()).hexdigest(),
    }, indent=2))

    # Precomputed neighbors: deterministic per-test rotation of the train ids.
    train_ids = [r["id"] for r in train_records]
    with (out / "neighbors.jsonl").open("w") as fh:
        for i, rec in enumerate(test_records):
            if rec["id"] == "te09":
                continue  # left out on purpose: exercises the skip path
            rotated = train_ids[i:] + train_ids[:i]
            fh.write(json.dumps({"test_id": rec["id"], "train_ids": rotated}) + "\n")

    (out / "mock_table.json").write_text(json.dumps(lookup_table, indent=2))
    print(f"fixture written to {out} ({len(ids)} vectors, dim {DIM})")


if __name__ == "__main__":
    main()
