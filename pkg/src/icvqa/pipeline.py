"""End-to-end orchestration: captions -> shots -> prompts -> ensemble -> scores.

Everything is keyed by test id and emitted in sorted order, so results do
not depend on worker scheduling or response arrival order. Per-sample
problems (missing neighbor entry, prompt over budget, all queries failed)
degrade to skip/fail entries in the run summary instead of aborting the run.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .backend import Backend, ReplayWriter, make_backend
from .captions import prefix_captions, rank_captions
from .config import RunConfig
from .ensemble import PredictionRecord, run_sample
from .errors import InputError, SampleSkipped
from .prompts import PromptBundle, build_parts, enforce_budget, estimate_tokens
from .shots import (
    ShotAssignment,
    assign_shots,
    load_neighbor_file,
    rank_avg_sim,
    rank_precomputed,
    rank_random,
)
from .store import Store, TestSample, ingest
from .vqa_eval import SampleScore, aggregate, aggregate_by_type, normalize, soft_accuracy


@dataclass
class PipelineCaches:
    """Reusable per-sample artifacts for sweeps; never change results.

    Caption orders cache the full dedup-sorted candidate list (any m is a
    prefix of it); shot rankings are keyed by (strategy, seed) so sweeping
    m/n/k reuses them while strategy sweeps do not.
    """

    caption_orders: dict[str, list[str]] = field(default_factory=dict)
    shot_rankings: dict[tuple[str, int, str], object] = field(default_factory=dict)


@dataclass
class RunResult:
    predictions: list[PredictionRecord]
    scores: list[SampleScore]
    summary: dict
    bundles: list[PromptBundle] = field(default_factory=list)
    wall_time_s: float = 0.0


def _test_captions(sample: TestSample, config: RunConfig,
                   caches: PipelineCaches | None = None) -> list[str]:
    if config.caption_type == "generic":
        if not sample.generic_captions:
            raise InputError(
                f"test sample {sample.id!r} lacks the generic_captions field"
            )
        return prefix_captions(sample.generic_captions, config.m)
    if caches is not None:
        full = caches.caption_orders.get(sample.id)
        if full is None:
            full = rank_captions(
                list(sample.candidate_captions), sample.image_emb,
                len(sample.candidate_captions), sample.id,
            ).texts()
            caches.caption_orders[sample.id] = full
        return full[: config.m]
    ranked = rank_captions(
        list(sample.candidate_captions), sample.image_emb, config.m, sample.id
    )
    return ranked.texts()


def _shot_captions(store: Store, train_id: str, config: RunConfig) -> list[str]:
    ex = store.train[train_id]
    if config.caption_type == "generic":
        if not ex.generic_captions:
            raise InputError(
                f"train example {train_id!r} lacks the generic_captions field"
            )
        return prefix_captions(ex.generic_captions, config.m)
    return prefix_captions(ex.captions, config.m)


def rank_for_sample(sample: TestSample, store: Store, config: RunConfig,
                    neighbors: dict | None, caches: PipelineCaches | None = None):
    if caches is not None:
        key = (config.strategy, config.seed, sample.id)
        if key in caches.shot_rankings:
            return caches.shot_rankings[key]
    if config.strategy == "avg_sim":
        ranking = rank_avg_sim(sample, sample.question_emb, store)
    elif config.strategy == "random":
        ranking = rank_random(sample.id, store, config.seed)
    else:
        ranking = rank_precomputed(sample.id, neighbors, store)
    if caches is not None:
        caches.shot_rankings[(config.strategy, config.seed, sample.id)] = ranking
    return ranking


def build_bundle(sample: TestSample, store: Store, config: RunConfig,
                 neighbors: dict | None = None,
                 token_counter=estimate_tokens,
                 caches: PipelineCaches | None = None) -> PromptBundle:
    """Render the k budget-enforced prompts for one test sample."""
    test_caps = _test_captions(sample, config, caches)
    if config.n == 0:
        assignment = ShotAssignment(
            test_id=sample.id, prompts=tuple(() for _ in range(config.k))
        )
    else:
        ranking = rank_for_sample(sample, store, config, neighbors, caches)
        assignment = assign_shots(ranking, config.n, config.k)

    prompts, dropped = [], []
    for shot_ids in assignment.prompts:
        parts = build_parts(
            config.template,
            shot_questions=[store.train[i].question for i in shot_ids],
            shot_answers=[store.train[i].answer for i in shot_ids],
            shot_captions=[_shot_captions(store, i, config) for i in shot_ids],
            test_question=sample.question,
            test_captions=test_caps,
        )
        trimmed, n_dropped = enforce_budget(
            parts, config.max_tokens, token_counter, sample.id
        )
        prompts.append(trimmed.render())
        dropped.append(n_dropped)
    return PromptBundle(
        test_id=sample.id, prompts=prompts, assignment=assignment, dropped_shots=dropped
    )


def score_predictions(predictions: list[PredictionRecord], store: Store,
                      metric_variant: str = "leave_one_out"
                      ) -> tuple[list[SampleScore], int]:
    """Score voted answers against human answers; returns (scores, n_unscorable)."""
    scores, skipped = [], 0
    direct = metric_variant == "direct"
    for pred in predictions:
        sample = store.test.get(pred.test_id)
        if sample is None or not sample.human_answers or pred.failed:
            skipped += 1
            continue
        humans = [normalize(h) for h in sample.human_answers]
        scores.append(
            soft_accuracy(pred.voted_answer, humans, pred.test_id, direct=direct)
        )
    return scores, skipped


def run_pipeline(store: Store, config: RunConfig, backend: Backend,
                 token_counter=estimate_tokens, score: bool = True,
                 caches: PipelineCaches | None = None) -> RunResult:
    config.validate()
    if token_counter is estimate_tokens and getattr(backend, "count_tokens", None):
        token_counter = backend.count_tokens
    start = time.monotonic()
    neighbors = (
        load_neighbor_file(config.neighbors_path)
        if config.strategy == "precomputed"
        else None
    )
    test_ids = sorted(store.test)
    skipped: dict[str, str] = {}
    bundles: dict[str, PromptBundle] = {}

    def prepare(tid: str):
        try:
            bundles[tid] = build_bundle(
                store.test[tid], store, config, neighbors, token_counter, caches
            )
        except SampleSkipped as exc:
            skipped[tid] = exc.reason

    for tid in test_ids:
        prepare(tid)

    predictions: dict[str, PredictionRecord] = {}
    with ThreadPoolExecutor(max_workers=config.backend.max_concurrency) as query_pool:
        def execute(tid: str):
            predictions[tid] = run_sample(
                bundles[tid], backend, config.decode, executor=query_pool
            )

        ready = [tid for tid in test_ids if tid in bundles]
        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as sample_pool:
                list(sample_pool.map(execute, ready))
        else:
            for tid in ready:
                execute(tid)

    ordered = [predictions[tid] for tid in sorted(predictions)]
    scores: list[SampleScore] = []
    n_unscorable = 0
    if score:
        scores, n_unscorable = score_predictions(ordered, store, config.metric_variant)

    n_failed = sum(1 for p in ordered if p.failed)
    empty_votes = sum(
        1 for p in ordered for a in p.normalized if a == ""
    )
    effective_n = [
        config.n - d for p in ordered for d in p.dropped_shots
    ]
    summary = {
        "accuracy_pct": round(aggregate(scores), 6) if scores else None,
        "n_samples": len(test_ids),
        "n_predicted": len(ordered),
        "n_scored": len(scores),
        "n_unscorable": n_unscorable,
        "n_failed": n_failed,
        "n_skipped": len(skipped),
        "skipped": dict(sorted(skipped.items())),
        "failure_rate": round(n_failed / len(ordered), 6) if ordered else 0.0,
        "empty_answer_votes": empty_votes,
        "effective_n_mean": (
            round(sum(effective_n) / len(effective_n), 6) if effective_n else None
        ),
        "metric_variant": config.metric_variant,
        "beam_fallback": backend.beam_fallback,
        "backend_tag": backend.tag,
        "config": config.to_manifest(),
    }
    if score and scores:
        types = {
            tid: s.question_type
            for tid, s in store.test.items()
            if s.question_type is not None
        }
        if types:
            summary["accuracy_by_type"] = {
                t: round(a, 6) for t, a in aggregate_by_type(scores, types).items()
            }
    return RunResult(
        predictions=ordered,
        scores=scores,
        summary=summary,
        bundles=[bundles[tid] for tid in sorted(bundles)],
        wall_time_s=time.monotonic() - start,
    )


def write_outputs(result: RunResult, store: Store, config: RunConfig,
                  out_dir: str | Path, dump_prompts: bool = False) -> Path:
    """Write the fixed output layout; a single writer, everything sorted."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": __version__,
        "config": config.to_manifest(),
        "store": store.manifest,
        "backend_tag": result.summary["backend_tag"],
        "wall_time_s": round(result.wall_time_s, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    with (out / "predictions.jsonl").open("w") as fh:
        for pred in result.predictions:
            fh.write(json.dumps(pred.to_record(), sort_keys=True) + "\n")
    with (out / "scores.jsonl").open("w") as fh:
        for s in result.scores:
            fh.write(json.dumps(
                {"test_id": s.test_id, "accuracy": s.accuracy,
                 "matched_humans": s.matched_humans},
                sort_keys=True,
            ) + "\n")
    (out / "summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True)
    )
    if dump_prompts:
        prompt_dir = out / "prompts"
        prompt_dir.mkdir(exist_ok=True)
        with (prompt_dir / "bundles.jsonl").open("w") as fh:
            for bundle in result.bundles:
                fh.write(json.dumps(bundle.to_record(), sort_keys=True) + "\n")
    return out


def build_run_backend(config: RunConfig, replay_writer: ReplayWriter | None = None
                      ) -> Backend:
    mock_data = None
    if config.backend.kind == "mock" and config.mock_mode == "lookup":
        if not config.mock_table_path:
            raise InputError("lookup mock requires mock_table_path")
        mock_data = json.loads(Path(config.mock_table_path).read_text())
    elif config.backend.kind == "mock" and config.mock_mode == "scripted":
        raise InputError("scripted mock is test-only; use lookup or echo_hash")
    return make_backend(
        config.backend, mock_mode=config.mock_mode, mock_data=mock_data,
        replay_writer=replay_writer,
    )


def ingest_from_config(config: RunConfig) -> Store:
    if not (config.train_path and config.test_path and config.embeddings_path):
        raise InputError("train, test, and embeddings paths are required")
    return ingest(config.train_path, config.test_path, config.embeddings_path)
