from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from adsafety.corpus import Label
from adsafety.gateway import (
    BackendConfig,
    BackendHttpError,
    BackendKind,
    BackendTimeout,
    BackendUnreachable,
    LlmGateway,
    MockBackend,
    MockRule,
    RetriesExhausted,
    complete,
)
from adsafety.promptkit import RenderedPrompt, Verdict, parse_response


def prompt_of(text: str) -> RenderedPrompt:
    return RenderedPrompt(
        text=text,
        template_id="t",
        revision=1,
        advertiser_id="adv1",
        char_budget_used=len(text),
        truncated=False,
    )


# -- mock backend ---------------------------------------------------------------


def mock_config(lexicon, log=None):
    return BackendConfig(
        kind=BackendKind.MOCK,
        mock_rule=MockRule(lexicon=lexicon, decision_if_match=Label.VIOLATING),
        invocation_log=log,
    )


def test_mock_lexicon_hit_gives_violating():
    raw = complete(prompt_of("this ad mentions Adult content"), mock_config(["adult"]))
    verdict = parse_response(raw)
    assert isinstance(verdict, Verdict)
    assert verdict.decision is Label.VIOLATING


def test_mock_no_hit_gives_default():
    raw = complete(prompt_of("family friendly flowers"), mock_config(["adult"]))
    verdict = parse_response(raw)
    assert isinstance(verdict, Verdict)
    assert verdict.decision is Label.NON_VIOLATING


def test_mock_is_deterministic():
    config = mock_config(["adult"])
    p = prompt_of("some prompt text")
    assert complete(p, config) == complete(p, config)


def test_mock_lexicon_normalized():
    # lexicon entries go through the same normalization as the prompt text
    rule = MockRule(lexicon=["  ADULT   Content "], decision_if_match=Label.VIOLATING)
    assert rule.lexicon == ["adult content"]
    raw = MockBackend(rule).complete("there is adult\tcontent here")
    verdict = parse_response(raw)
    assert verdict.decision is Label.VIOLATING


def test_mock_always_parses():
    import random

    rng = random.Random(41)
    backend = MockBackend(MockRule(lexicon=["bad"], decision_if_match=Label.VIOLATING))
    for _ in range(50):
        text = "".join(rng.choice("abcd bad\n") for _ in range(rng.randint(0, 200)))
        assert isinstance(parse_response(backend.complete(text)), Verdict)


def test_mock_invocation_log_counts(tmp_path):
    log = tmp_path / "calls.log"
    gw = LlmGateway(mock_config(["x"], log=str(log)))
    for i in range(3):
        gw.complete(prompt_of(f"prompt {i}"))
    assert log.read_text().splitlines() == ["adv1", "adv1", "adv1"]


def test_gateway_semaphore_bounds_in_flight():
    config = mock_config([])
    config.max_in_flight = 2
    gw = LlmGateway(config)

    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    class SlowBackend:
        def complete(self, text, tag=""):
            with lock:
                state["now"] += 1
                state["peak"] = max(state["peak"], state["now"])
            time.sleep(0.02)
            with lock:
                state["now"] -= 1
            return "SUMMARY: s\nPRODUCTS: p\nDECISION: NON_VIOLATING\nRATIONALE: r"

    gw._backend = SlowBackend()
    threads = [
        threading.Thread(target=gw.complete, args=(prompt_of(f"p{i}"),)) for i in range(8)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert state["peak"] <= 2


# -- HTTP backend ----------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    script: list[dict] = []
    requests_seen: list[dict] = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        type(self).requests_seen.append(
            {"body": body, "auth": self.headers.get("Authorization")}
        )
        step = self.script.pop(0) if self.script else {"status": 200}
        if step.get("sleep"):
            time.sleep(step["sleep"])
        status = step.get("status", 200)
        payload = step.get(
            "payload",
            {"text": "SUMMARY: s\nPRODUCTS: p\nDECISION: NON_VIOLATING\nRATIONALE: r"},
        )
        data = json.dumps(payload).encode() if not isinstance(payload, bytes) else payload
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    _Handler.script = []
    _Handler.requests_seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", _Handler
    server.shutdown()


def http_config(url, **overrides):
    defaults = dict(
        kind=BackendKind.HTTP,
        endpoint_url=url,
        timeout=2.0,
        max_retries=2,
        retry_backoff=0.01,
    )
    defaults.update(overrides)
    return BackendConfig(**defaults)


def test_http_happy_path(http_server):
    url, handler = http_server
    raw = complete(prompt_of("hello"), http_config(url))
    assert "DECISION: NON_VIOLATING" in raw
    assert handler.requests_seen[0]["body"] == {"prompt": "hello"}


def test_http_sends_bearer_token(http_server, monkeypatch):
    url, handler = http_server
    monkeypatch.setenv("TEST_ADSAFETY_TOKEN", "sekret")
    complete(prompt_of("x"), http_config(url, auth_token_env_var="TEST_ADSAFETY_TOKEN"))
    assert handler.requests_seen[0]["auth"] == "Bearer sekret"


def test_http_4xx_fails_immediately(http_server):
    url, handler = http_server
    handler.script = [{"status": 404}]
    with pytest.raises(BackendHttpError) as exc_info:
        complete(prompt_of("x"), http_config(url))
    assert exc_info.value.status == 404
    assert len(handler.requests_seen) == 1


def test_http_5xx_retries_then_exhausts(http_server):
    url, handler = http_server
    handler.script = [{"status": 500}] * 10
    with pytest.raises(RetriesExhausted):
        complete(prompt_of("x"), http_config(url, max_retries=2))
    assert len(handler.requests_seen) == 3  # max_retries + 1 attempts


def test_http_transient_then_success(http_server):
    url, handler = http_server
    handler.script = [{"status": 503}, {"status": 200}]
    raw = complete(prompt_of("x"), http_config(url))
    assert "DECISION" in raw
    assert len(handler.requests_seen) == 2


def test_http_malformed_body(http_server):
    url, handler = http_server
    handler.script = [{"payload": {"nope": 1}}]
    with pytest.raises(BackendHttpError, match="text"):
        complete(prompt_of("x"), http_config(url))


def test_http_timeout(http_server):
    url, handler = http_server
    handler.script = [{"sleep": 0.5}] * 2
    with pytest.raises(BackendTimeout):
        complete(prompt_of("x"), http_config(url, timeout=0.1, max_retries=1))


def test_http_unreachable():
    with pytest.raises(BackendUnreachable):
        complete(
            prompt_of("x"),
            http_config("http://127.0.0.1:9", timeout=0.2, max_retries=1),
        )


def test_http_requires_endpoint():
    with pytest.raises(Exception, match="endpoint_url"):
        LlmGateway(BackendConfig(kind=BackendKind.HTTP))
