"""Command-line entry point.

Subcommands: ingest, rank-captions, select-shots, build-prompts, run, eval,
ablate, replay. Config precedence: defaults < --config file < flags.
Exit codes: 0 success, 1 input error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .ablation import SweepSpec, parse_axis_value, run_sweep, write_csv, write_plot
from .backend import BackendConfig, ReplayBackend, ReplayWriter
from .captions import rank_captions
from .config import RunConfig, load_config
from .ensemble import PredictionRecord
from .errors import EngineError, InputError, SampleSkipped
from .pipeline import (
    build_run_backend,
    ingest_from_config,
    rank_for_sample,
    run_pipeline,
    write_outputs,
)
from .shots import assign_shots, load_neighbor_file
from .store import ingest
from .vqa_eval import aggregate, normalize, soft_accuracy


class _Parser(argparse.ArgumentParser):
    # Usage problems are input errors: exit 1, not argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    p.add_argument("--train", dest="train_path", help="train JSONL")
    p.add_argument("--test", dest="test_path", help="test JSONL")
    p.add_argument("--embeddings", dest="embeddings_path", help="embedding manifest JSON")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=["avg_sim", "random", "precomputed"])
    p.add_argument("--neighbors", dest="neighbors_path", help="precomputed neighbor JSONL")
    p.add_argument("--n", type=int, help="shots per prompt")
    p.add_argument("--m", type=int, help="captions per shot")
    p.add_argument("--k", type=int, help="ensemble size")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--caption-type", dest="caption_type",
                   choices=["question_informative", "generic"])
    p.add_argument("--jobs", type=int, help="sample worker count")
    p.add_argument("--direct-metric", action="store_true",
                   help="use min(matches/3, 1) instead of leave-one-out")


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--endpoint", help="completion endpoint URL (or ICVQA_ENDPOINT)")
    p.add_argument("--model", help="model name sent to the endpoint")
    p.add_argument("--mock-mode", choices=["echo_hash", "lookup"])
    p.add_argument("--mock-table", help="JSON question->answer table for lookup mock")
    p.add_argument("--retry-count", type=int)
    p.add_argument("--max-concurrency", type=int)
    p.add_argument("--timeout", type=float)


def _config_from_args(args) -> RunConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "train_path", "test_path", "embeddings_path", "neighbors_path",
            "strategy", "n", "m", "k", "seed", "max_tokens", "caption_type", "jobs",
        )
    }
    cfg = load_config(getattr(args, "config", None), overrides)
    if getattr(args, "direct_metric", False):
        cfg.metric_variant = "direct"
    if getattr(args, "backend", None):
        cfg.backend.kind = args.backend
    if getattr(args, "endpoint", None):
        cfg.backend.endpoint_url = args.endpoint
    if getattr(args, "model", None):
        cfg.backend.model_name = args.model
    if getattr(args, "retry_count", None) is not None:
        cfg.backend.retry_count = args.retry_count
    if getattr(args, "max_concurrency", None) is not None:
        cfg.backend.max_concurrency = args.max_concurrency
    if getattr(args, "timeout", None) is not None:
        cfg.backend.timeout = args.timeout
    if getattr(args, "mock_mode", None):
        cfg.mock_mode = args.mock_mode
    if getattr(args, "mock_table", None):
        cfg.mock_table_path = args.mock_table
    if cfg.backend.kind == "http":
        # Re-run the env fallback now that flags are applied.
        cfg.backend = BackendConfig(**vars(cfg.backend))
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def _write_manifest(out: Path, cfg: RunConfig, store_manifest: dict,
                    backend_tag: str = "none") -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(
        {
            "version": __version__,
            "config": cfg.to_manifest(),
            "store": store_manifest,
            "backend_tag": backend_tag,
        },
        indent=2, sort_keys=True,
    ))


def cmd_ingest(args) -> int:
    cfg = _config_from_args(args)
    store = ingest_from_config(cfg)
    print(json.dumps(store.manifest, indent=2, sort_keys=True))
    return 0


def cmd_rank_captions(args) -> int:
    cfg = _config_from_args(args)
    store = ingest_from_config(cfg)
    out = Path(cfg.output_dir)
    _write_manifest(out, cfg, store.manifest)
    with (out / "ranked_captions.jsonl").open("w") as fh:
        for tid in sorted(store.test):
            sample = store.test[tid]
            ranked = rank_captions(
                list(sample.candidate_captions), sample.image_emb, cfg.m, tid
            )
            fh.write(json.dumps(
                {"sample_id": tid, "m": cfg.m,
                 "captions": [[t, s] for t, s in ranked.captions]},
                sort_keys=True,
            ) + "\n")
    return 0


def cmd_select_shots(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    store = ingest_from_config(cfg)
    neighbors = (
        load_neighbor_file(cfg.neighbors_path)
        if cfg.strategy == "precomputed" else None
    )
    out = Path(cfg.output_dir)
    _write_manifest(out, cfg, store.manifest)
    with (out / "shot_assignments.jsonl").open("w") as fh:
        for tid in sorted(store.test):
            try:
                ranking = rank_for_sample(store.test[tid], store, cfg, neighbors)
                assignment = assign_shots(ranking, cfg.n, cfg.k)
            except SampleSkipped as exc:
                fh.write(json.dumps(
                    {"test_id": tid, "skipped": exc.reason}, sort_keys=True) + "\n")
                continue
            fh.write(json.dumps(
                {"test_id": tid, "strategy": cfg.strategy,
                 "prompts": [list(p) for p in assignment.prompts]},
                sort_keys=True,
            ) + "\n")
    return 0


def cmd_build_prompts(args) -> int:
    from .pipeline import PipelineCaches, build_bundle

    cfg = _config_from_args(args)
    cfg.validate()
    store = ingest_from_config(cfg)
    neighbors = (
        load_neighbor_file(cfg.neighbors_path)
        if cfg.strategy == "precomputed" else None
    )
    out = Path(cfg.output_dir)
    _write_manifest(out, cfg, store.manifest)
    prompt_dir = out / "prompts"
    prompt_dir.mkdir(parents=True, exist_ok=True)
    caches = PipelineCaches()
    with (prompt_dir / "bundles.jsonl").open("w") as fh:
        for tid in sorted(store.test):
            try:
                bundle = build_bundle(store.test[tid], store, cfg, neighbors,
                                      caches=caches)
            except SampleSkipped as exc:
                fh.write(json.dumps(
                    {"test_id": tid, "skipped": exc.reason}, sort_keys=True) + "\n")
                continue
            fh.write(json.dumps(bundle.to_record(), sort_keys=True) + "\n")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    store = ingest_from_config(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    writer = ReplayWriter(out / "replay.log")
    backend = build_run_backend(cfg, replay_writer=writer)
    result = run_pipeline(store, cfg, backend, score=args.score)
    write_outputs(result, store, cfg, out, dump_prompts=args.dump_prompts)
    print(json.dumps(
        {"out": str(out), "n_predicted": result.summary["n_predicted"],
         "accuracy_pct": result.summary["accuracy_pct"]},
        sort_keys=True,
    ))
    return 0


def cmd_replay(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    store = ingest_from_config(cfg)
    backend = ReplayBackend(args.log)
    result = run_pipeline(store, cfg, backend, score=args.score)
    write_outputs(result, store, cfg, cfg.output_dir)
    print(json.dumps({"out": str(cfg.output_dir),
                      "n_predicted": result.summary["n_predicted"]}, sort_keys=True))
    return 0


def _load_jsonl(path: str) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise InputError(f"file not found: {path}")
    return [json.loads(line) for line in p.read_text().splitlines() if line.strip()]


def cmd_eval(args) -> int:
    metric = "direct" if args.direct_metric else "leave_one_out"
    dataset = {rec["id"]: rec for rec in _load_jsonl(args.dataset)}
    scores, skipped = [], 0
    for rec in _load_jsonl(args.predictions):
        tid = rec["test_id"]
        sample = dataset.get(tid)
        humans = (sample or {}).get("human_answers") or []
        if sample is None or len(humans) != 10 or rec.get("failed") or \
                rec.get("voted_answer") is None:
            skipped += 1
            continue
        scores.append(soft_accuracy(
            rec["voted_answer"], [normalize(h) for h in humans], tid,
            direct=(metric == "direct"),
        ))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "scores.jsonl").open("w") as fh:
        for s in sorted(scores, key=lambda s: s.test_id):
            fh.write(json.dumps(
                {"test_id": s.test_id, "accuracy": s.accuracy,
                 "matched_humans": s.matched_humans},
                sort_keys=True,
            ) + "\n")
    summary = {
        "accuracy_pct": round(aggregate(scores), 6) if scores else None,
        "n_scored": len(scores),
        "n_skipped": skipped,
        "metric_variant": metric,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    store = ingest_from_config(cfg)
    values = [parse_axis_value(args.axis, v) for v in args.values.split(",")]
    spec = SweepSpec(axis=args.axis, values=values, fixed=cfg, seed=cfg.seed)
    backend = build_run_backend(cfg)
    result = run_sweep(spec, store, backend, use_cache=not args.no_cache)
    write_csv(result, args.out_csv)
    if args.plot:
        write_plot(result, args.plot)
    print(json.dumps({"rows": len(result.rows), "csv": args.out_csv}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="icvqa",
        description="Few-shot in-context KB-VQA pipeline. "
        "Config precedence: defaults < --config file < flags (flags win).",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate datasets and embeddings")
    _add_data_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rank-captions", help="emit ranked captions for audit")
    _add_data_flags(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_rank_captions)

    p = sub.add_parser("select-shots", help="emit shot assignments")
    _add_data_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_select_shots)

    p = sub.add_parser("build-prompts", help="dry-run prompt rendering")
    _add_data_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_build_prompts)

    p = sub.add_parser("run", help="full pipeline")
    _add_data_flags(p)
    _add_pipeline_flags(p)
    _add_backend_flags(p)
    p.add_argument("--out", default="out")
    p.add_argument("--score", action="store_true", help="also score predictions")
    p.add_argument("--dump-prompts", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True, help="test JSONL with human answers")
    p.add_argument("--out", default="out")
    p.add_argument("--direct-metric", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep one pipeline knob")
    _add_data_flags(p)
    _add_pipeline_flags(p)
    _add_backend_flags(p)
    p.add_argument("--axis", required=True, choices=["m", "n", "k", "strategy", "caption_type"])
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--out", dest="out_csv", required=True, help="output CSV path")
    p.add_argument("--plot", help="optional SVG path")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("replay", help="re-run offline from a replay log")
    _add_data_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--log", required=True, help="replay log from a recorded run")
    p.add_argument("--out", default="out")
    p.add_argument("--score", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
