import json

import pytest

from icvqa.cli import main

from .conftest import FIXTURES


def data_flags():
    return [
        "--train", str(FIXTURES / "train.jsonl"),
        "--test", str(FIXTURES / "test.jsonl"),
        "--embeddings", str(FIXTURES / "embeddings.json"),
    ]


def run_flags(out, extra=()):
    return [
        "run", *data_flags(),
        "--backend", "mock", "--mock-mode", "lookup",
        "--mock-table", str(FIXTURES / "mock_table.json"),
        "--n", "3", "--m", "2", "--k", "2",
        "--out", str(out), *extra,
    ]


class TestRun:
    def test_fixture_smoke(self, tmp_path, capsys):
        assert main(run_flags(tmp_path / "r", ["--score"])) == 0
        out = tmp_path / "r"
        preds = (out / "predictions.jsonl").read_text().splitlines()
        assert len(preds) == 10
        for name in ("manifest.json", "summary.json", "scores.jsonl", "replay.log"):
            assert (out / name).exists()

    def test_run_then_eval_equals_fused_score_path(self, tmp_path):
        assert main(run_flags(tmp_path / "plain")) == 0
        assert main(run_flags(tmp_path / "fused", ["--score"])) == 0
        assert main([
            "eval",
            "--predictions", str(tmp_path / "plain" / "predictions.jsonl"),
            "--dataset", str(FIXTURES / "test.jsonl"),
            "--out", str(tmp_path / "evald"),
        ]) == 0
        assert (tmp_path / "evald" / "scores.jsonl").read_text() == \
               (tmp_path / "fused" / "scores.jsonl").read_text()
        eval_summary = json.loads((tmp_path / "evald" / "summary.json").read_text())
        fused_summary = json.loads((tmp_path / "fused" / "summary.json").read_text())
        assert eval_summary["accuracy_pct"] == fused_summary["accuracy_pct"]

    def test_replay_reproduces_predictions_offline(self, tmp_path):
        assert main(run_flags(tmp_path / "orig", ["--score"])) == 0
        assert main([
            "replay", *data_flags(),
            "--n", "3", "--m", "2", "--k", "2",
            "--log", str(tmp_path / "orig" / "replay.log"),
            "--out", str(tmp_path / "replayed"), "--score",
        ]) == 0
        assert (tmp_path / "replayed" / "predictions.jsonl").read_bytes() == \
               (tmp_path / "orig" / "predictions.jsonl").read_bytes()


class TestEval:
    def test_missing_dataset_sample_counts_as_skipped(self, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        preds.write_text(json.dumps({
            "test_id": "ghost", "voted_answer": "dog", "failed": False,
        }) + "\n" + json.dumps({
            "test_id": "te00", "voted_answer": "dog", "failed": False,
        }) + "\n")
        assert main([
            "eval", "--predictions", str(preds),
            "--dataset", str(FIXTURES / "test.jsonl"),
            "--out", str(tmp_path / "out"),
        ]) == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["n_skipped"] == 1
        assert summary["n_scored"] == 1


class TestSubcommands:
    def test_ingest_prints_manifest(self, capsys):
        assert main(["ingest", *data_flags()]) == 0
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["train_count"] == 30

    def test_rank_captions_emits_jsonl(self, tmp_path):
        assert main([
            "rank-captions", *data_flags(), "--m", "2", "--out", str(tmp_path),
        ]) == 0
        lines = (tmp_path / "ranked_captions.jsonl").read_text().splitlines()
        assert len(lines) == 10
        rec = json.loads(lines[0])
        assert len(rec["captions"]) == 2
        scores = [s for _, s in rec["captions"]]
        assert scores == sorted(scores, reverse=True)

    def test_select_shots_strided(self, tmp_path):
        assert main([
            "select-shots", *data_flags(),
            "--strategy", "random", "--seed", "3", "--n", "2", "--k", "2",
            "--out", str(tmp_path),
        ]) == 0
        lines = (tmp_path / "shot_assignments.jsonl").read_text().splitlines()
        rec = json.loads(lines[0])
        flat = [t for p in rec["prompts"] for t in p]
        assert len(set(flat)) == 4

    def test_build_prompts_dry_run(self, tmp_path):
        assert main([
            "build-prompts", *data_flags(),
            "--n", "2", "--m", "2", "--k", "2", "--out", str(tmp_path),
        ]) == 0
        lines = (tmp_path / "prompts" / "bundles.jsonl").read_text().splitlines()
        assert len(lines) == 10
        rec = json.loads(lines[0])
        assert len(rec["prompts"]) == 2
        assert rec["prompts"][0].endswith("A: ")

    def test_ablate_writes_csv(self, tmp_path):
        csv_path = tmp_path / "sweep.csv"
        assert main([
            "ablate", *data_flags(),
            "--backend", "mock", "--mock-mode", "lookup",
            "--mock-table", str(FIXTURES / "mock_table.json"),
            "--n", "2", "--m", "2", "--k", "2",
            "--axis", "k", "--values", "1,2",
            "--out", str(csv_path),
        ]) == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("axis_value,accuracy_pct")
        assert len(lines) == 3


class TestExitCodes:
    def test_unknown_flag_exits_one(self, capsys):
        assert main(["run", "--bogus"]) == 1

    def test_missing_file_exits_one(self, tmp_path):
        assert main([
            "run", "--train", "/nope.jsonl",
            "--test", str(FIXTURES / "test.jsonl"),
            "--embeddings", str(FIXTURES / "embeddings.json"),
            "--out", str(tmp_path),
        ]) == 1

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text(f"""
[data]
train = {FIXTURES / 'train.jsonl'}
test = {FIXTURES / 'test.jsonl'}
embeddings = {FIXTURES / 'embeddings.json'}

[pipeline]
n = 2
m = 2
k = 4

[template]
head = Answer briefly.

[backend]
kind = mock
mock_mode = lookup
mock_table = {FIXTURES / 'mock_table.json'}
""")
        out = tmp_path / "out"
        # --k flag must beat the config file's k=4
        assert main(["run", "--config", str(cfg), "--k", "1",
                     "--out", str(out), "--score", "--dump-prompts"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["config"]["k"] == 1
        bundle = json.loads(
            (out / "prompts" / "bundles.jsonl").read_text().splitlines()[0]
        )
        assert bundle["prompts"][0].startswith("Answer briefly.")
