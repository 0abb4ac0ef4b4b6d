from __future__ import annotations

import json
import threading
import urllib.request

import pytest
from hypothesis import given
from hypothesis import strategies as st

from selfrefine.backend import (
    BackendScript,
    ChatMessage,
    ChatRequest,
    HttpBackend,
    HttpConfig,
    ScriptedBackend,
    ScriptedReply,
    StubReply,
    parse_completion,
    scripted_next,
    stub_serve,
)
from selfrefine.domain import PromptKind, TokenUsage
from selfrefine.errors import (
    AuthError,
    ConfigError,
    MalformedResponse,
    RateLimited,
    RequestRejected,
    ScriptExhausted,
    ServerError,
)
from selfrefine.prompts import render_vote
from selfrefine.domain import Answer, Query


def req(content: str = "hello", kind: PromptKind | None = None, model: str = "m") -> ChatRequest:
    return ChatRequest.single(model, content, temperature=0.0, kind=kind)


# --- request type --------------------------------------------------------


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest("m", (), 0.0)
    with pytest.raises(ValueError):
        ChatRequest.single("m", "")
    with pytest.raises(ValueError):
        ChatRequest.single("m", "x", temperature=2.5)
    with pytest.raises(ValueError):
        ChatMessage("tool", "x")


def test_kind_tag_is_not_transmitted():
    body = req("x", PromptKind.VOTE).to_wire()
    assert set(body) == {"model", "messages", "temperature"}


_content = st.text(min_size=1, max_size=50)


@given(
    model=st.text(max_size=20),
    messages=st.lists(st.tuples(st.sampled_from(["user", "system", "assistant"]), _content), min_size=1, max_size=4),
    temperature=st.floats(min_value=0, max_value=2, allow_nan=False),
)
def test_wire_body_round_trips(model, messages, temperature):
    request = ChatRequest(model, tuple(ChatMessage(r, c) for r, c in messages), temperature)
    once = json.dumps(request.to_wire())
    again = json.dumps(ChatRequest.from_wire(json.loads(once)).to_wire())
    assert once == again


def test_from_wire_is_strict():
    with pytest.raises(ValueError):
        ChatRequest.from_wire({"model": "m", "messages": [{"role": "user", "content": "x"}], "temperature": 0, "n": 2})


# --- scripted backend ----------------------------------------------------


def test_scripted_plays_back_vote():
    backend = ScriptedBackend({PromptKind.VOTE: [ScriptedReply("2", 40, 1)]})
    resp = backend.complete(req("anything", PromptKind.VOTE))
    assert resp.content == "2"
    assert resp.usage == TokenUsage(40, 1, 41)


def test_scripted_exhaustion_is_explicit():
    backend = ScriptedBackend({PromptKind.DEFECT_ANALYSIS: []})
    with pytest.raises(ScriptExhausted):
        backend.complete(req("x", PromptKind.DEFECT_ANALYSIS))
    with pytest.raises(ScriptExhausted):
        backend.complete(req("x", PromptKind.BLIND_OPTIMIZATION))


def test_scripted_engine_call_order():
    script = BackendScript(
        {
            PromptKind.INITIAL_ANSWER: ["A0"],
            PromptKind.DEFECT_ANALYSIS: ["too long"],
            PromptKind.GUIDED_OPTIMIZATION: ["A1"],
            PromptKind.VOTE: ["2"],
        }
    )
    backend = ScriptedBackend(script)
    order = [PromptKind.INITIAL_ANSWER, PromptKind.DEFECT_ANALYSIS, PromptKind.GUIDED_OPTIMIZATION, PromptKind.VOTE]
    assert [backend.complete(req("x", k)).content for k in order] == ["A0", "too long", "A1", "2"]


def test_scripted_vote_queue_is_fifo():
    script = BackendScript({PromptKind.VOTE: ["1", "2"]})
    assert scripted_next(script, req("x", PromptKind.VOTE)).content == "1"
    assert scripted_next(script, req("x", PromptKind.VOTE)).content == "2"


def test_scripted_falls_back_to_classifying_untagged_requests():
    q = Query("q", "Q", 1)
    vote_text = render_vote(q, Answer("a", 0), Answer("b", 1)).text
    backend = ScriptedBackend({PromptKind.VOTE: ["0"], PromptKind.INITIAL_ANSWER: ["hi"]})
    assert backend.complete(req(vote_text)).content == "0"
    assert backend.complete(req("plain question")).content == "hi"


@given(st.lists(st.text(min_size=1, max_size=30), min_size=3, max_size=3))
def test_scripted_replies_ignore_request_text(texts):
    replies = ["r1", "r2", "r3"]
    backend = ScriptedBackend({PromptKind.GUIDED_OPTIMIZATION: replies})
    got = [backend.complete(req(t, PromptKind.GUIDED_OPTIMIZATION)).content for t in texts]
    assert got == replies


def test_scripted_concurrent_pops_are_atomic():
    n = 400
    backend = ScriptedBackend({PromptKind.VOTE: [str(i) for i in range(n)]})
    seen: list[str] = []
    lock = threading.Lock()

    def worker():
        for _ in range(n // 8):
            content = backend.complete(req("x", PromptKind.VOTE)).content
            with lock:
                seen.append(content)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(seen, key=int) == [str(i) for i in range(n)]


def test_script_file_format(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(
        json.dumps(
            {
                "initial": [{"content": "A0", "prompt_tokens": 9, "completion_tokens": 3}],
                "blind_optimize": [{"content": "A1", "prompt_tokens": 30, "completion_tokens": 3}],
                "vote": ["2"],
            }
        )
    )
    script = BackendScript.from_file(path)
    assert script.remaining(PromptKind.INITIAL_ANSWER) == 1
    assert script.pop(PromptKind.BLIND_OPTIMIZATION) == ScriptedReply("A1", 30, 3)
    assert script.pop(PromptKind.VOTE).content == "2"


def test_script_file_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        BackendScript.from_dict({"critique": ["x"]})


# --- wire parsing ----------------------------------------------------------

LONDON = {
    "choices": [{"message": {"role": "assistant", "content": "London"}}],
    "usage": {"prompt_tokens": 12, "completion_tokens": 3, "total_tokens": 15},
}


def test_parse_completion_fixture():
    content, usage, _ = parse_completion(LONDON)
    assert content == "London"
    assert usage == TokenUsage(12, 3, 15)


def test_parse_completion_total_only_and_absent_usage():
    body = {"choices": [{"message": {"content": "x"}}], "usage": {"total_tokens": 7}}
    assert parse_completion(body)[1] == TokenUsage(None, None, 7)
    assert parse_completion({"choices": [{"message": {"content": "x"}}]})[1] == TokenUsage()


@pytest.mark.parametrize(
    "body",
    [
        {},
        {"choices": []},
        {"choices": [{"message": {"content": None}}]},
        {"choices": [{"message": {"content": "x"}}], "usage": {"prompt_tokens": 1, "completion_tokens": 1, "total_tokens": 3}},
        ["not", "an", "object"],
    ],
)
def test_parse_completion_malformed(body):
    with pytest.raises(MalformedResponse):
        parse_completion(body)


# --- HTTP client against the stub ----------------------------------------


def config_for(stub, **kw) -> tuple[HttpConfig, list[float]]:
    delays: list[float] = []
    cfg = HttpConfig(stub.base_url, "test-key", timeout=5, sleep=delays.append, **kw)
    return cfg, delays


def test_http_extracts_content_and_usage():
    with stub_serve([StubReply(200, LONDON)]) as stub:
        cfg, _ = config_for(stub)
        resp = HttpBackend(cfg).complete(ChatRequest.single("gpt-x", "Capital of the UK?", temperature=0.7))
    assert resp.content == "London"
    assert resp.usage == TokenUsage(12, 3, 15)
    assert resp.attempts == 1
    assert stub.requests == [
        {"model": "gpt-x", "messages": [{"role": "user", "content": "Capital of the UK?"}], "temperature": 0.7}
    ]
    assert stub.headers[0]["Authorization"] == "Bearer test-key"


def test_http_retries_rate_limits_then_succeeds():
    fixtures = [StubReply(429, {"error": "slow down"}), StubReply(429, {"error": "slow down"}), StubReply(200, LONDON)]
    with stub_serve(fixtures) as stub:
        cfg, delays = config_for(stub)
        resp = HttpBackend(cfg).complete(req())
    assert resp.attempts == 3
    assert len(stub.requests) == 3
    assert len(delays) == 2
    assert 0 <= delays[0] <= 1.0 and 0 <= delays[1] <= 2.0


def test_http_gives_up_after_five_attempts():
    with stub_serve([StubReply(503, {"error": "down"})] * 6) as stub:
        cfg, delays = config_for(stub)
        with pytest.raises(ServerError):
            HttpBackend(cfg).complete(req())
    assert len(stub.requests) == 5
    assert len(delays) == 4


def test_http_rate_limit_exhaustion_raises_rate_limited():
    with stub_serve([StubReply(429, {})] * 5) as stub:
        cfg, _ = config_for(stub)
        with pytest.raises(RateLimited):
            HttpBackend(cfg).complete(req())


def test_backoff_caps_are_non_decreasing():
    cfg = HttpConfig("http://x", "k")
    caps = [cfg.backoff_cap(i) for i in range(4)]
    assert caps == [1.0, 2.0, 4.0, 8.0]


@pytest.mark.parametrize("status", [401, 403])
def test_http_auth_errors_are_not_retried(status):
    with stub_serve([StubReply(status, {"error": "bad key"}), StubReply(200, LONDON)]) as stub:
        cfg, delays = config_for(stub)
        with pytest.raises(AuthError):
            HttpBackend(cfg).complete(req())
    assert len(stub.requests) == 1
    assert delays == []


def test_http_other_client_errors_are_not_retried():
    with stub_serve([StubReply(400, {"error": "bad"}), StubReply(200, LONDON)]) as stub:
        cfg, _ = config_for(stub)
        with pytest.raises(RequestRejected):
            HttpBackend(cfg).complete(req())
    assert len(stub.requests) == 1


def test_http_missing_choices_is_malformed():
    with stub_serve([StubReply(200, {"id": "x"})]) as stub:
        cfg, _ = config_for(stub)
        with pytest.raises(MalformedResponse):
            HttpBackend(cfg).complete(req())


def test_http_non_json_body_is_malformed():
    with stub_serve([StubReply(200, "<html>")]) as stub:
        cfg, _ = config_for(stub)
        with pytest.raises(MalformedResponse):
            HttpBackend(cfg).complete(req())


def test_stub_serves_500_past_the_last_fixture():
    with stub_serve([StubReply.completion("one")]) as stub:
        url = stub.base_url + "/chat/completions"
        body = json.dumps({"model": "m", "messages": [], "temperature": 0}).encode()
        urllib.request.urlopen(urllib.request.Request(url, data=body, method="POST")).read()
        with pytest.raises(urllib.error.HTTPError) as info:
            urllib.request.urlopen(urllib.request.Request(url, data=body, method="POST"))
        assert info.value.code == 500
        assert "request #2" in info.value.read().decode()
    assert "messages" in stub.requests[0]


def test_stub_requires_fixtures():
    with pytest.raises(ValueError):
        stub_serve([])


def test_config_from_env(monkeypatch):
    monkeypatch.delenv("REFINE_API_KEY", raising=False)
    monkeypatch.setenv("OPENAI_API_KEY", "fallback")
    monkeypatch.setenv("REFINE_BASE_URL", "http://local:1/v1")
    cfg = HttpConfig.from_env()
    assert cfg.api_key == "fallback" and cfg.endpoint == "http://local:1/v1/chat/completions"
    monkeypatch.setenv("REFINE_API_KEY", "primary")
    assert HttpConfig.from_env().api_key == "primary"
    monkeypatch.delenv("REFINE_API_KEY")
    monkeypatch.delenv("OPENAI_API_KEY")
    with pytest.raises(ConfigError):
        HttpConfig.from_env()
