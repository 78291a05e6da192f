"""Run configuration: dataclass, INI config files, and flag overrides.

Precedence is built-in defaults < config file < command-line flags. The
full effective config is echoed into every run manifest so any output can
be reproduced from its manifest alone.
"""

from __future__ import annotations

import codecs
import configparser
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .backend import DEFAULT_STOP_SEQUENCES, BackendConfig, DecodeParams
from .errors import InputError
from .prompts import DEFAULT_MAX_TOKENS, PromptTemplate

CAPTION_TYPES = ("question_informative", "generic")
METRIC_VARIANTS = ("leave_one_out", "direct")


@dataclass
class RunConfig:
    train_path: str = ""
    test_path: str = ""
    embeddings_path: str = ""
    neighbors_path: str | None = None
    strategy: str = "avg_sim"
    n: int = 10
    m: int = 9
    k: int = 5
    seed: int = 0
    caption_type: str = "question_informative"
    max_tokens: int = DEFAULT_MAX_TOKENS
    metric_variant: str = "leave_one_out"
    jobs: int = 1
    output_dir: str = "out"
    template: PromptTemplate = field(default_factory=PromptTemplate)
    backend: BackendConfig = field(default_factory=BackendConfig)
    decode: DecodeParams = field(default_factory=DecodeParams)
    mock_mode: str = "echo_hash"
    mock_table_path: str | None = None

    def validate(self) -> None:
        if self.strategy not in ("avg_sim", "random", "precomputed"):
            raise InputError(f"unknown strategy {self.strategy!r}")
        if self.caption_type not in CAPTION_TYPES:
            raise InputError(f"unknown caption_type {self.caption_type!r}")
        if self.metric_variant not in METRIC_VARIANTS:
            raise InputError(f"unknown metric_variant {self.metric_variant!r}")
        if self.strategy == "precomputed" and not self.neighbors_path:
            raise InputError("precomputed strategy requires neighbors_path")
        if self.m < 1 or self.k < 1 or self.n < 0:
            raise InputError(f"invalid knobs m={self.m} n={self.n} k={self.k}")
        if self.jobs < 1:
            raise InputError("jobs must be >= 1")

    def to_manifest(self) -> dict:
        d = dataclasses.asdict(self)
        d["decode"]["stop_sequences"] = list(self.decode.stop_sequences)
        d["decode"]["extra"] = dict(self.decode.extra)
        # Where outputs land does not affect what they contain; runs that
        # differ only in output_dir must compare as equal-manifest.
        d.pop("output_dir")
        return d


def _unescape(value: str) -> str:
    return codecs.decode(value, "unicode_escape")


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional INI file plus flag overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise InputError(f"config file not found: {path}")
        data = parser["data"] if parser.has_section("data") else {}
        cfg.train_path = data.get("train", cfg.train_path)
        cfg.test_path = data.get("test", cfg.test_path)
        cfg.embeddings_path = data.get("embeddings", cfg.embeddings_path)
        cfg.neighbors_path = data.get("neighbors", cfg.neighbors_path)

        pipe = parser["pipeline"] if parser.has_section("pipeline") else {}
        cfg.strategy = pipe.get("strategy", cfg.strategy)
        cfg.n = int(pipe.get("n", cfg.n))
        cfg.m = int(pipe.get("m", cfg.m))
        cfg.k = int(pipe.get("k", cfg.k))
        cfg.seed = int(pipe.get("seed", cfg.seed))
        cfg.caption_type = pipe.get("caption_type", cfg.caption_type)
        cfg.max_tokens = int(pipe.get("max_tokens", cfg.max_tokens))
        cfg.metric_variant = pipe.get("metric", cfg.metric_variant)
        cfg.jobs = int(pipe.get("jobs", cfg.jobs))
        cfg.output_dir = pipe.get("output_dir", cfg.output_dir)

        if parser.has_section("template"):
            tpl = parser["template"]
            base = PromptTemplate()
            cfg.template = PromptTemplate(
                head=_unescape(tpl.get("head", base.head)),
                context_label=_unescape(tpl.get("context_label", base.context_label)),
                question_label=_unescape(tpl.get("question_label", base.question_label)),
                answer_label=_unescape(tpl.get("answer_label", base.answer_label)),
                block_separator=_unescape(tpl.get("block_separator", base.block_separator)),
                caption_joiner=_unescape(tpl.get("caption_joiner", base.caption_joiner)),
            )

        if parser.has_section("backend"):
            be = parser["backend"]
            cfg.backend = BackendConfig(
                kind=be.get("kind", "mock"),
                endpoint_url=be.get("endpoint_url") or None,
                model_name=be.get("model_name", "llama-13b"),
                timeout=float(be.get("timeout", 30.0)),
                retry_count=int(be.get("retry_count", 2)),
                retry_backoff=float(be.get("retry_backoff", 0.5)),
                max_concurrency=int(be.get("max_concurrency", 4)),
            )
            cfg.mock_mode = be.get("mock_mode", cfg.mock_mode)
            cfg.mock_table_path = be.get("mock_table") or cfg.mock_table_path

        if parser.has_section("decode"):
            dec = parser["decode"]
            known = {"beam_size", "max_new_tokens", "stop_sequences"}
            extra = tuple(
                (key, _coerce(dec[key])) for key in dec if key not in known
            )
            stop = dec.get("stop_sequences")
            cfg.decode = DecodeParams(
                beam_size=int(dec.get("beam_size", 2)),
                max_new_tokens=int(dec.get("max_new_tokens", 5)),
                stop_sequences=tuple(json.loads(stop)) if stop else DEFAULT_STOP_SEQUENCES,
                extra=extra,
            )

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise InputError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg


def _coerce(value: str):
    try:
        return json.loads(value)
    except ValueError:
        return value
