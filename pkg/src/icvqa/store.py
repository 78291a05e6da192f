"""Dataset and embedding ingestion.

Loads the train/test JSONL records plus the binary embedding pack, validates
everything, re-normalizes vectors to unit length, and serves them as an
immutable in-memory store. Cosine similarity reduces to a dot product because
every vector is unit-norm after ingestion.

File layout for an embedding pack rooted at ``<base>.json``:
  <base>.json        manifest {dim, count, model_tag, checksum}
  <base>.bin         row-major little-endian float32, one row per vector
  <base>.index.json  mapping emb_id -> row number
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

NORM_TOL = 1e-6


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit vectors, clamped to [-1, 1]."""
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(min(1.0, max(-1.0, float(np.dot(a, b)))))


def normalize_vector(values: np.ndarray, emb_id: str = "") -> np.ndarray:
    """Return a unit-norm float32 copy; idempotent on already-unit vectors."""
    v = np.asarray(values, dtype=np.float32)
    if not np.all(np.isfinite(v)):
        raise InputError(f"non-finite embedding values{' for ' + emb_id if emb_id else ''}")
    norm = float(np.linalg.norm(v.astype(np.float64)))
    if norm == 0.0:
        raise InputError(f"zero-norm embedding{' for ' + emb_id if emb_id else ''}")
    if abs(norm - 1.0) > NORM_TOL:
        v = (v.astype(np.float64) / norm).astype(np.float32)
    return v


@dataclass(frozen=True)
class TrainExample:
    id: str
    question: str
    answer: str
    captions: tuple[str, ...]
    question_emb: np.ndarray
    image_emb: np.ndarray
    generic_captions: tuple[str, ...] = ()


@dataclass(frozen=True)
class TestSample:
    id: str
    question: str
    candidate_captions: tuple[tuple[str, np.ndarray], ...]
    image_emb: np.ndarray
    human_answers: tuple[str, ...] = ()
    question_emb: np.ndarray | None = None
    generic_captions: tuple[str, ...] = ()
    question_type: str | None = None


@dataclass
class Store:
    train: dict[str, TrainExample]
    test: dict[str, TestSample]
    dim: int
    manifest: dict
    embeddings: dict[str, np.ndarray]
    _train_matrix_cache: dict = field(default_factory=dict, repr=False)

    @property
    def checksum(self) -> str:
        return self.manifest["checksum"]

    def train_ids_sorted(self) -> list[str]:
        return sorted(self.train)

    def train_matrices(self) -> tuple[list[str], np.ndarray, np.ndarray]:
        """Stacked (question, image) embedding matrices in sorted-id order."""
        if not self._train_matrix_cache:
            ids = self.train_ids_sorted()
            q = np.stack([self.train[i].question_emb for i in ids])
            v = np.stack([self.train[i].image_emb for i in ids])
            self._train_matrix_cache.update(ids=ids, q=q, v=v)
        c = self._train_matrix_cache
        return c["ids"], c["q"], c["v"]


def _embedding_paths(manifest_path: Path) -> tuple[Path, Path]:
    base = manifest_path.with_suffix("")
    return base.with_suffix(".bin"), Path(str(base) + ".index.json")


def _file_checksum(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def load_embedding_pack(manifest_path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Load and validate one embedding pack; vectors come back unit-norm."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise InputError(f"embedding manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    for key in ("dim", "count", "model_tag", "checksum"):
        if key not in manifest:
            raise InputError(f"embedding manifest missing key {key!r}")
    bin_path, index_path = _embedding_paths(manifest_path)
    if not bin_path.exists() or not index_path.exists():
        raise InputError(f"embedding pack incomplete next to {manifest_path}")

    actual = _file_checksum(bin_path)
    if actual != manifest["checksum"]:
        raise InputError(
            f"embedding checksum mismatch: manifest {manifest['checksum']}, file {actual}"
        )

    dim, count = int(manifest["dim"]), int(manifest["count"])
    raw = np.fromfile(bin_path, dtype="<f4")
    if raw.size != dim * count:
        raise InputError(
            f"embedding binary holds {raw.size} floats, manifest implies {dim * count}"
        )
    rows = raw.reshape(count, dim)

    index = json.loads(index_path.read_text())
    if len(index) != count:
        raise InputError(f"id index has {len(index)} entries, manifest count is {count}")

    vectors: dict[str, np.ndarray] = {}
    for emb_id, row in index.items():
        if not 0 <= row < count:
            raise InputError(f"id index row {row} out of range for {emb_id!r}")
        vec = normalize_vector(rows[row], emb_id)
        vec.setflags(write=False)
        vectors[emb_id] = vec
    return manifest, vectors


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise InputError(f"dataset file not found: {path}")
    records = []
    with path.open() as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{line_no}: bad JSON ({exc})") from exc
    return records


def _lookup(vectors: dict[str, np.ndarray], emb_id: str, owner: str) -> np.ndarray:
    if emb_id not in vectors:
        raise InputError(f"missing embedding {emb_id!r} referenced by {owner}")
    return vectors[emb_id]


def ingest(train_path: str | Path, test_path: str | Path, embeddings_path: str | Path) -> Store:
    """Build a validated Store from the on-disk formats."""
    train_path, test_path = Path(train_path), Path(test_path)
    embeddings_path = Path(embeddings_path)
    emb_manifest, vectors = load_embedding_pack(embeddings_path)
    dim = int(emb_manifest["dim"])

    train: dict[str, TrainExample] = {}
    for rec in _read_jsonl(train_path):
        rid = rec["id"]
        if rid in train:
            raise InputError(f"duplicate train id {rid!r}")
        captions = tuple(rec["captions"])
        if not captions:
            raise InputError(f"train example {rid!r} has no captions")
        if not rec["answer"]:
            raise InputError(f"train example {rid!r} has empty answer")
        train[rid] = TrainExample(
            id=rid,
            question=rec["question"],
            answer=rec["answer"],
            captions=captions,
            question_emb=_lookup(vectors, rec["question_emb_id"], f"train {rid!r}"),
            image_emb=_lookup(vectors, rec["image_emb_id"], f"train {rid!r}"),
            generic_captions=tuple(rec.get("generic_captions", ())),
        )

    test: dict[str, TestSample] = {}
    for rec in _read_jsonl(test_path):
        rid = rec["id"]
        if rid in test:
            raise InputError(f"duplicate test id {rid!r}")
        entries = rec["caption_entries"]
        if not entries:
            raise InputError(f"test sample {rid!r} has no caption entries")
        humans = tuple(rec.get("human_answers", ()))
        if len(humans) not in (0, 10):
            raise InputError(
                f"test sample {rid!r} has {len(humans)} human answers (need 0 or 10)"
            )
        q_emb_id = rec.get("question_emb_id")
        test[rid] = TestSample(
            id=rid,
            question=rec["question"],
            candidate_captions=tuple(
                (e["text"], _lookup(vectors, e["emb_id"], f"test {rid!r}")) for e in entries
            ),
            image_emb=_lookup(vectors, rec["image_emb_id"], f"test {rid!r}"),
            human_answers=humans,
            question_emb=_lookup(vectors, q_emb_id, f"test {rid!r}") if q_emb_id else None,
            generic_captions=tuple(rec.get("generic_captions", ())),
            question_type=rec.get("question_type"),
        )

    manifest = {
        "train_path": str(train_path),
        "test_path": str(test_path),
        "embeddings_path": str(embeddings_path),
        "train_checksum": _file_checksum(train_path),
        "test_checksum": _file_checksum(test_path),
        "checksum": emb_manifest["checksum"],
        "model_tag": emb_manifest["model_tag"],
        "dim": dim,
        "train_count": len(train),
        "test_count": len(test),
    }
    return Store(train=train, test=test, dim=dim, manifest=manifest, embeddings=vectors)


def write_embedding_pack(
    manifest_path: str | Path, vectors: dict[str, np.ndarray], model_tag: str
) -> dict:
    """Write a pack in id-index order; returns the manifest written."""
    manifest_path = Path(manifest_path)
    bin_path, index_path = _embedding_paths(manifest_path)
    ids = list(vectors)
    if not ids:
        raise InputError("refusing to write an empty embedding pack")
    dims = {v.shape[0] for v in vectors.values()}
    if len(dims) != 1:
        raise InputError(f"inconsistent embedding dimensions: {sorted(dims)}")
    matrix = np.stack([np.asarray(vectors[i], dtype="<f4") for i in ids])
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    matrix.tofile(bin_path)
    index_path.write_text(json.dumps({i: row for row, i in enumerate(ids)}, indent=0))
    manifest = {
        "dim": int(matrix.shape[1]),
        "count": len(ids),
        "model_tag": model_tag,
        "checksum": _file_checksum(bin_path),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest


def export(store: Store, train_path: str | Path, test_path: str | Path,
           embeddings_path: str | Path) -> None:
    """Inverse of ingest; a re-ingest of the export reproduces the store."""
    write_embedding_pack(embeddings_path, store.embeddings, store.manifest["model_tag"])
    emb_ids = {id(v): k for k, v in store.embeddings.items()}

    def ref(vec: np.ndarray) -> str:
        return emb_ids[id(vec)]

    with Path(train_path).open("w") as fh:
        for ex in store.train.values():
            rec = {
                "id": ex.id,
                "question": ex.question,
                "answer": ex.answer,
                "captions": list(ex.captions),
                "question_emb_id": ref(ex.question_emb),
                "image_emb_id": ref(ex.image_emb),
            }
            if ex.generic_captions:
                rec["generic_captions"] = list(ex.generic_captions)
            fh.write(json.dumps(rec) + "\n")
    with Path(test_path).open("w") as fh:
        for ts in store.test.values():
            rec = {
                "id": ts.id,
                "question": ts.question,
                "caption_entries": [
                    {"text": t, "emb_id": ref(v)} for t, v in ts.candidate_captions
                ],
                "image_emb_id": ref(ts.image_emb),
            }
            if ts.human_answers:
                rec["human_answers"] = list(ts.human_answers)
            if ts.question_emb is not None:
                rec["question_emb_id"] = ref(ts.question_emb)
            if ts.generic_captions:
                rec["generic_captions"] = list(ts.generic_captions)
            if ts.question_type is not None:
                rec["question_type"] = ts.question_type
            fh.write(json.dumps(rec) + "\n")
