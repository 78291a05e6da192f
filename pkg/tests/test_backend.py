import pytest

from icvqa.backend import (
    BackendConfig,
    CompletionRequest,
    DecodeParams,
    HttpBackend,
    MockBackend,
    ReplayBackend,
    ReplayWriter,
)
from icvqa.errors import BackendError, EngineError, InputError

from .stub_server import StubCompletionServer

PARAMS = DecodeParams()


def req(prompt, cid="r0"):
    return CompletionRequest(correlation_id=cid, prompt=prompt, params=PARAMS)


def http_config(url, **kwargs):
    defaults = dict(kind="http", endpoint_url=url, retry_count=2,
                    retry_backoff=0.01, timeout=2.0)
    defaults.update(kwargs)
    return BackendConfig(**defaults)


class TestMockBackend:
    def test_scripted_pops_in_order(self):
        mock = MockBackend("scripted", ["dog", "cat"])
        assert mock.complete(req("p1")).text == "dog"
        assert mock.complete(req("p2")).text == "cat"

    def test_scripted_exhaustion_is_error(self):
        mock = MockBackend("scripted", [])
        with pytest.raises(EngineError, match="exhausted"):
            mock.complete(req("p"))

    def test_lookup_parses_last_question_line(self):
        mock = MockBackend("lookup", {"what animal?": "cat"})
        prompt = "head\nQ: ignored?\nA: x\nQ: what animal?\nA: "
        assert mock.complete(req(prompt)).text == "cat"

    def test_lookup_unmapped_returns_unknown(self):
        mock = MockBackend("lookup", {})
        assert mock.complete(req("Q: novel?\nA: ")).text == "unknown"

    def test_echo_hash_deterministic(self):
        mock = MockBackend("echo_hash")
        assert mock.complete(req("same")).text == mock.complete(req("same")).text

    def test_echo_hash_differs_on_one_byte(self):
        mock = MockBackend("echo_hash")
        assert mock.complete(req("same")).text != mock.complete(req("samf")).text

    def test_unknown_mode_rejected(self):
        with pytest.raises(InputError):
            MockBackend("nope")


class TestHttpBackend:
    def test_success_returns_continuation(self):
        with StubCompletionServer(lambda body, n: (200, {"text": " lemon"})) as server:
            backend = HttpBackend(http_config(server.url))
            resp = backend.complete(req("prompt"))
            assert resp.text == " lemon"
            sent = server.requests[0]
            assert sent["prompt"] == "prompt"
            assert sent["num_beams"] == 2
            assert sent["max_tokens"] == 5
            assert sent["stop"] == ["\n", "Q:", "==="]

    def test_persistent_500_fails_after_exactly_three_attempts(self):
        with StubCompletionServer(lambda body, n: (500, {})) as server:
            backend = HttpBackend(http_config(server.url, retry_count=2))
            with pytest.raises(BackendError, match="exhausted 3 attempts"):
                backend.complete(req("p"))
            assert len(server.requests) == 3

    def test_transient_500_then_success(self):
        def behavior(body, attempt):
            return (500, {}) if attempt == 1 else (200, {"text": "ok"})

        with StubCompletionServer(behavior) as server:
            backend = HttpBackend(http_config(server.url))
            assert backend.complete(req("p")).text == "ok"
            assert len(server.requests) == 2

    def test_malformed_reply_is_backend_error(self):
        with StubCompletionServer(lambda body, n: (200, "not json{")) as server:
            backend = HttpBackend(http_config(server.url))
            with pytest.raises(BackendError, match="malformed"):
                backend.complete(req("p"))

    def test_num_beams_rejection_falls_back_to_greedy(self):
        def behavior(body, attempt):
            if "num_beams" in body:
                return (400, {"error": "unknown field num_beams"})
            return (200, {"text": "greedy"})

        with StubCompletionServer(behavior) as server:
            backend = HttpBackend(http_config(server.url))
            assert backend.complete(req("p")).text == "greedy"
            assert backend.beam_fallback is True
            # Subsequent requests go straight to greedy.
            backend.complete(req("p2", "r1"))
            assert "num_beams" not in server.requests[-1]

    def test_non_retryable_4xx_is_immediate_error(self):
        with StubCompletionServer(lambda body, n: (403, {})) as server:
            backend = HttpBackend(http_config(server.url))
            with pytest.raises(BackendError, match="403"):
                backend.complete(req("p"))
            assert len(server.requests) == 1

    def test_auth_token_env_sets_header(self, monkeypatch):
        monkeypatch.setenv("ICVQA_AUTH_TOKEN", "sekrit")
        captured = {}

        def behavior(body, attempt):
            return (200, {"text": "ok"})

        with StubCompletionServer(behavior) as server:
            backend = HttpBackend(http_config(server.url))
            assert backend._session.headers["Authorization"] == "Bearer sekrit"
            backend.complete(req("p"))

    def test_endpoint_env_override(self, monkeypatch):
        monkeypatch.setenv("ICVQA_ENDPOINT", "http://example.invalid/v1")
        cfg = BackendConfig(kind="http", endpoint_url=None)
        assert cfg.endpoint_url == "http://example.invalid/v1"

    def test_http_without_endpoint_rejected(self, monkeypatch):
        monkeypatch.delenv("ICVQA_ENDPOINT", raising=False)
        with pytest.raises(InputError, match="endpoint_url"):
            BackendConfig(kind="http")


class TestReplay:
    def test_record_and_replay_round_trip(self, tmp_path):
        log = tmp_path / "replay.log"
        writer = ReplayWriter(log)
        mock = MockBackend("echo_hash", replay_writer=writer)
        original = mock.complete(req("some prompt"))
        replay = ReplayBackend(log)
        assert replay.complete(req("some prompt")).text == original.text

    def test_replay_misses_unknown_prompt(self, tmp_path):
        log = tmp_path / "replay.log"
        ReplayWriter(log)
        replay = ReplayBackend(log)
        with pytest.raises(BackendError, match="no recorded response"):
            replay.complete(req("never seen"))
