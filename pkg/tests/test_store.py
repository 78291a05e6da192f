import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from icvqa.errors import InputError
from icvqa.store import cosine, export, ingest, load_embedding_pack, normalize_vector


def unit(values):
    v = np.asarray(values, dtype=np.float32)
    return v / np.linalg.norm(v)


class TestCosine:
    def test_self_similarity_is_one(self):
        v = unit([0.3, -1.2, 0.5])
        assert cosine(v, v) == 1.0

    def test_orthogonal_is_zero(self):
        assert cosine(unit([1, 0]), unit([0, 1])) == 0.0

    def test_hand_computed_dot_product(self):
        assert cosine(unit([0.6, 0.8]), unit([0.8, 0.6])) == pytest.approx(0.96)

    def test_dimension_mismatch_is_fatal(self):
        with pytest.raises(InputError, match="dimension mismatch"):
            cosine(unit([1, 0]), unit([1, 0, 0]))

    @given(
        arrays(np.float32, 5, elements=st.floats(-1, 1, width=32)),
        arrays(np.float32, 5, elements=st.floats(-1, 1, width=32)),
    )
    def test_symmetric_and_bounded(self, a, b):
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        a, b = normalize_vector(a), normalize_vector(b)
        assert cosine(a, b) == cosine(b, a)
        assert -1.0 <= cosine(a, b) <= 1.0


class TestNormalizeVector:
    def test_renormalizes_direction_preserving(self):
        v = normalize_vector(np.array([0.0, 2.0], dtype=np.float32))
        assert np.allclose(v, [0.0, 1.0])
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-6

    def test_zero_norm_fatal(self):
        with pytest.raises(InputError, match="zero-norm"):
            normalize_vector(np.zeros(4, dtype=np.float32), "q_bad")

    def test_nan_fatal(self):
        with pytest.raises(InputError, match="non-finite"):
            normalize_vector(np.array([np.nan, 1.0], dtype=np.float32))

    @settings(max_examples=200)
    @given(arrays(np.float32, 8, elements=st.floats(-100, 100, width=32)))
    def test_idempotent_bitwise(self, v):
        if np.linalg.norm(v.astype(np.float64)) == 0:
            return
        once = normalize_vector(v)
        twice = normalize_vector(once)
        assert once.tobytes() == twice.tobytes()


class TestIngest:
    def test_fixture_counts(self, store):
        assert len(store.train) == 30
        assert len(store.test) == 10
        assert store.dim == 8

    def test_all_vectors_unit_norm(self, store):
        for v in store.embeddings.values():
            assert abs(float(np.linalg.norm(v.astype(np.float64))) - 1.0) <= 1e-6
            assert v.shape == (store.dim,)

    def test_missing_embedding_names_id(self, fixture_copy):
        train = fixture_copy / "train.jsonl"
        lines = train.read_text().splitlines()
        rec = json.loads(lines[0])
        rec["question_emb_id"] = "q_99"
        lines[0] = json.dumps(rec)
        train.write_text("\n".join(lines) + "\n")
        with pytest.raises(InputError, match="q_99"):
            ingest(train, fixture_copy / "test.jsonl", fixture_copy / "embeddings.json")

    def test_duplicate_id_rejected(self, fixture_copy):
        train = fixture_copy / "train.jsonl"
        lines = train.read_text().splitlines()
        train.write_text("\n".join(lines + [lines[0]]) + "\n")
        with pytest.raises(InputError, match="duplicate train id"):
            ingest(train, fixture_copy / "test.jsonl", fixture_copy / "embeddings.json")

    def test_checksum_tamper_detected(self, fixture_copy):
        bin_path = fixture_copy / "embeddings.bin"
        data = bytearray(bin_path.read_bytes())
        data[13] ^= 0xFF
        bin_path.write_bytes(bytes(data))
        with pytest.raises(InputError, match="checksum mismatch"):
            load_embedding_pack(fixture_copy / "embeddings.json")

    def test_dimension_inconsistency_fatal(self, fixture_copy):
        manifest_path = fixture_copy / "embeddings.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["dim"] = manifest["dim"] + 1
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(InputError):
            load_embedding_pack(manifest_path)

    def test_bad_human_answer_count(self, fixture_copy):
        test = fixture_copy / "test.jsonl"
        lines = test.read_text().splitlines()
        rec = json.loads(lines[0])
        rec["human_answers"] = ["a", "b", "c"]
        lines[0] = json.dumps(rec)
        test.write_text("\n".join(lines) + "\n")
        with pytest.raises(InputError, match="human answers"):
            ingest(fixture_copy / "train.jsonl", test, fixture_copy / "embeddings.json")


class TestRoundTrip:
    def test_export_ingest_reproduces_store(self, store, tmp_path):
        export(store, tmp_path / "train.jsonl", tmp_path / "test.jsonl",
               tmp_path / "emb.json")
        again = ingest(tmp_path / "train.jsonl", tmp_path / "test.jsonl",
                       tmp_path / "emb.json")
        assert sorted(again.train) == sorted(store.train)
        assert sorted(again.test) == sorted(store.test)
        for tid, ex in store.train.items():
            other = again.train[tid]
            assert other.question == ex.question
            assert other.answer == ex.answer
            assert other.captions == ex.captions
            assert other.question_emb.tobytes() == ex.question_emb.tobytes()
            assert other.image_emb.tobytes() == ex.image_emb.tobytes()
        for tid, ts in store.test.items():
            other = again.test[tid]
            assert other.question == ts.question
            assert other.human_answers == ts.human_answers
            for (t1, v1), (t2, v2) in zip(ts.candidate_captions, other.candidate_captions):
                assert t1 == t2 and v1.tobytes() == v2.tobytes()

    def test_double_export_bitwise_identical_binary(self, store, tmp_path):
        export(store, tmp_path / "t1.jsonl", tmp_path / "s1.jsonl", tmp_path / "e1.json")
        again = ingest(tmp_path / "t1.jsonl", tmp_path / "s1.jsonl", tmp_path / "e1.json")
        export(again, tmp_path / "t2.jsonl", tmp_path / "s2.jsonl", tmp_path / "e2.json")
        assert (tmp_path / "e1.bin").read_bytes() == (tmp_path / "e2.bin").read_bytes()
