"""Ablation sweeps over the pipeline knobs.

One axis is varied per sweep (captions per shot m, shots n, ensemble size
k, shot strategy, caption type) while the fixed config supplies everything
else. Shot and caption rankings are cached across points when the swept
axis cannot affect them; disabling the cache must reproduce identical rows.
"""

from __future__ import annotations

import copy
import csv
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .backend import Backend
from .config import RunConfig
from .errors import EngineError, InputError
from .pipeline import PipelineCaches, run_pipeline
from .prompts import estimate_tokens
from .store import Store

AXES = ("m", "n", "k", "strategy", "caption_type")
CSV_COLUMNS = (
    "axis_value", "accuracy_pct", "n_scored", "n_failed",
    "effective_n_mean", "wall_time_s",
)

_STRATEGY_RE = re.compile(r"^(\w+)(?:\(seed=(\d+)\)|:(\d+))?$")


@dataclass
class SweepSpec:
    axis: str
    values: list
    fixed: RunConfig
    seed: int = 0

    def __post_init__(self):
        if self.axis not in AXES:
            raise InputError(f"unknown sweep axis {self.axis!r}")
        if not self.values:
            raise InputError("sweep values must be non-empty")


@dataclass
class SweepResult:
    axis: str
    rows: list[dict] = field(default_factory=list)


def parse_axis_value(axis: str, raw: str):
    if axis in ("m", "n", "k"):
        try:
            return int(raw)
        except ValueError as exc:
            raise InputError(f"axis {axis} needs integer values, got {raw!r}") from exc
    if axis == "strategy":
        match = _STRATEGY_RE.match(raw.strip())
        if not match:
            raise InputError(f"bad strategy value {raw!r}")
        seed = match.group(2) or match.group(3)
        return (match.group(1), int(seed) if seed is not None else None)
    return raw.strip()


def _point_config(spec: SweepSpec, value) -> RunConfig:
    cfg = copy.deepcopy(spec.fixed)
    cfg.seed = spec.seed if spec.seed else cfg.seed
    if spec.axis == "strategy":
        strategy, seed = value
        cfg.strategy = strategy
        if seed is not None:
            cfg.seed = seed
    else:
        setattr(cfg, spec.axis, value)
    cfg.validate()
    return cfg


def _format_value(axis: str, value) -> str:
    if axis == "strategy":
        strategy, seed = value
        return strategy if seed is None else f"{strategy}:{seed}"
    return str(value)


def run_sweep(spec: SweepSpec, store: Store, backend: Backend,
              token_counter=estimate_tokens, use_cache: bool = True) -> SweepResult:
    caches = PipelineCaches() if use_cache else None
    result = SweepResult(axis=spec.axis)
    for value in spec.values:
        start = time.monotonic()
        row = {"axis_value": _format_value(spec.axis, value)}
        try:
            cfg = _point_config(spec, value)
            run = run_pipeline(
                store, cfg, backend, token_counter=token_counter, caches=caches
            )
            row.update(
                accuracy_pct=run.summary["accuracy_pct"],
                n_scored=run.summary["n_scored"],
                n_failed=run.summary["n_failed"],
                effective_n_mean=run.summary["effective_n_mean"],
            )
        except EngineError as exc:
            row.update(
                accuracy_pct="NA", n_scored=0, n_failed="NA",
                effective_n_mean="NA", error=str(exc),
            )
        row["wall_time_s"] = round(time.monotonic() - start, 3)
        result.rows.append(row)
    return result


def write_csv(result: SweepResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in result.rows:
            writer.writerow(row)


def write_plot(result: SweepResult, path: str | Path) -> None:
    """Accuracy-vs-axis line chart as SVG; needs matplotlib."""
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise InputError("plot output requires matplotlib") from exc
    xs = [row["axis_value"] for row in result.rows]
    ys = [
        row["accuracy_pct"] if isinstance(row["accuracy_pct"], (int, float)) else None
        for row in result.rows
    ]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel(result.axis)
    ax.set_ylabel("accuracy (%)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(str(path), format="svg")
    plt.close(fig)
