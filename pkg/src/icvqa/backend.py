"""Text-completion backends.

One interface, three implementations: an HTTP client for a remote
completion endpoint (JSON in/out, bounded retries, concurrency cap), a
deterministic mock for tests, and a replay backend that serves recorded
responses offline. The engine never looks inside a backend; responses are
paired to requests by correlation id.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import BackendError, EngineError, InputError

DEFAULT_STOP_SEQUENCES = ("\n", "Q:", "===")

ENDPOINT_ENV = "ICVQA_ENDPOINT"
AUTH_TOKEN_ENV = "ICVQA_AUTH_TOKEN"


@dataclass(frozen=True)
class DecodeParams:
    beam_size: int = 2
    max_new_tokens: int = 5
    stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES
    extra: tuple[tuple[str, object], ...] = ()  # pass-through generation knobs

    def __post_init__(self):
        if self.beam_size < 1 or self.max_new_tokens < 1:
            raise InputError("beam_size and max_new_tokens must be positive")


@dataclass(frozen=True)
class CompletionRequest:
    correlation_id: str
    prompt: str
    params: DecodeParams

    def __post_init__(self):
        if not self.prompt:
            raise InputError("prompt must be non-empty")


@dataclass(frozen=True)
class CompletionResponse:
    correlation_id: str
    text: str
    backend_tag: str
    latency: float


@dataclass
class BackendConfig:
    kind: str = "mock"  # {http, mock}
    endpoint_url: str | None = None
    model_name: str = "llama-13b"
    timeout: float = 30.0
    retry_count: int = 2
    retry_backoff: float = 0.5
    max_concurrency: int = 4

    def __post_init__(self):
        if self.kind == "http":
            self.endpoint_url = os.environ.get(ENDPOINT_ENV, self.endpoint_url)
            if not self.endpoint_url:
                raise InputError("http backend requires endpoint_url")


class Backend:
    """Shared interface; implementations must be thread-safe."""

    tag = "backend"
    beam_fallback = False
    # Optional exact tokenizer (text -> int); the prompt budget uses it
    # instead of the word-count estimate when a backend advertises one.
    count_tokens = None

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError


class HttpBackend(Backend):
    def __init__(self, config: BackendConfig, replay_writer: "ReplayWriter | None" = None):
        if config.kind != "http":
            raise InputError(f"HttpBackend got config kind {config.kind!r}")
        self.config = config
        self.tag = f"http:{config.model_name}"
        self._semaphore = threading.Semaphore(config.max_concurrency)
        self._session = requests.Session()
        token = os.environ.get(AUTH_TOKEN_ENV)
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"
        self._replay_writer = replay_writer
        self._lock = threading.Lock()

    def _body(self, request: CompletionRequest, with_beams: bool) -> dict:
        params = request.params
        body = {
            "model": self.config.model_name,
            "prompt": request.prompt,
            "max_tokens": params.max_new_tokens,
            "stop": list(params.stop_sequences),
        }
        if with_beams:
            body["num_beams"] = params.beam_size
        body.update(dict(params.extra))
        return body

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._semaphore:
            return self._complete_locked(request)

    def _complete_locked(self, request: CompletionRequest) -> CompletionResponse:
        start = time.monotonic()
        attempts = self.config.retry_count + 1
        with_beams = not self.beam_fallback
        last_error = "unknown"
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.retry_backoff * 2 ** (attempt - 1))
            try:
                resp = self._session.post(
                    self.config.endpoint_url,
                    json=self._body(request, with_beams),
                    timeout=self.config.timeout,
                )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = f"transport: {exc}"
                continue
            if resp.status_code == 400 and with_beams and "num_beams" in resp.text:
                # Endpoint rejects beam search; degrade to greedy once and
                # record it for the run report.
                with self._lock:
                    self.beam_fallback = True
                with_beams = False
                resp = self._session.post(
                    self.config.endpoint_url,
                    json=self._body(request, with_beams),
                    timeout=self.config.timeout,
                )
            if resp.status_code >= 500:
                last_error = f"status {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise BackendError(
                    f"{request.correlation_id}: endpoint returned {resp.status_code}"
                )
            try:
                text = resp.json()["text"]
            except (ValueError, KeyError) as exc:
                raise BackendError(
                    f"{request.correlation_id}: malformed endpoint reply ({exc})"
                ) from exc
            response = CompletionResponse(
                correlation_id=request.correlation_id,
                text=text,
                backend_tag=self.tag,
                latency=time.monotonic() - start,
            )
            if self._replay_writer:
                self._replay_writer.record(request, response)
            return response
        raise BackendError(
            f"{request.correlation_id}: exhausted {attempts} attempts ({last_error})"
        )


class MockBackend(Backend):
    """Deterministic stand-in. Modes:

    scripted  — pops answers off a queue in request order
    lookup    — parses the final question line and answers from a table
    echo_hash — returns a stable short hash of the prompt
    """

    def __init__(self, mode: str = "echo_hash", data=None, question_label: str = "Q: ",
                 delay_fn=None, fail_ids: set[str] | None = None,
                 replay_writer: "ReplayWriter | None" = None):
        if mode not in ("scripted", "lookup", "echo_hash"):
            raise InputError(f"unknown mock mode {mode!r}")
        self.mode = mode
        self.tag = f"mock:{mode}"
        self.question_label = question_label
        self._queue = list(data) if mode == "scripted" else None
        self._table = dict(data) if mode == "lookup" else None
        self._delay_fn = delay_fn
        self._fail_ids = fail_ids or set()
        self._lock = threading.Lock()
        self._replay_writer = replay_writer

    def _last_question(self, prompt: str) -> str:
        questions = [
            line[len(self.question_label):]
            for line in prompt.splitlines()
            if line.startswith(self.question_label)
        ]
        return questions[-1] if questions else ""

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if self._delay_fn:
            time.sleep(self._delay_fn(request.correlation_id))
        if request.correlation_id in self._fail_ids:
            raise BackendError(f"{request.correlation_id}: injected failure")
        if self.mode == "scripted":
            with self._lock:
                if not self._queue:
                    raise EngineError("scripted mock queue exhausted")
                text = self._queue.pop(0)
        elif self.mode == "lookup":
            text = self._table.get(self._last_question(request.prompt), "unknown")
        else:
            text = hashlib.sha256(request.prompt.encode()).hexdigest()[:8]
        response = CompletionResponse(
            correlation_id=request.correlation_id,
            text=text,
            backend_tag=self.tag,
            latency=0.0,
        )
        if self._replay_writer:
            self._replay_writer.record(request, response)
        return response


def _replay_key(prompt: str, params: DecodeParams) -> str:
    payload = json.dumps(
        {
            "prompt": prompt,
            "beam_size": params.beam_size,
            "max_new_tokens": params.max_new_tokens,
            "stop": list(params.stop_sequences),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


class ReplayWriter:
    """Appends request/response pairs to a JSONL replay log."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("")

    def record(self, request: CompletionRequest, response: CompletionResponse) -> None:
        entry = {
            "key": _replay_key(request.prompt, request.params),
            "correlation_id": request.correlation_id,
            "prompt": request.prompt,
            "text": response.text,
            "backend_tag": response.backend_tag,
        }
        with self._lock:
            with self.path.open("a") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


class ReplayBackend(Backend):
    """Serves recorded responses; no network."""

    def __init__(self, path: str | Path):
        path = Path(path)
        if not path.exists():
            raise InputError(f"replay log not found: {path}")
        self.tag = "replay"
        self._responses: dict[str, str] = {}
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entry = json.loads(line)
                    self._responses[entry["key"]] = entry["text"]

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = _replay_key(request.prompt, request.params)
        if key not in self._responses:
            raise BackendError(f"{request.correlation_id}: no recorded response")
        return CompletionResponse(
            correlation_id=request.correlation_id,
            text=self._responses[key],
            backend_tag=self.tag,
            latency=0.0,
        )


def make_backend(config: BackendConfig, mock_mode: str = "echo_hash", mock_data=None,
                 replay_writer: ReplayWriter | None = None) -> Backend:
    if config.kind == "http":
        return HttpBackend(config, replay_writer=replay_writer)
    if config.kind == "mock":
        return MockBackend(mode=mock_mode, data=mock_data, replay_writer=replay_writer)
    raise InputError(f"unknown backend kind {config.kind!r}")
