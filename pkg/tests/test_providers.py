from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from sqgen.providers import (
    HTTPCompletionProvider,
    MockProvider,
    ProviderError,
    SamplingParams,
    ScriptEntry,
)


# ── sampling params ───────────────────────────────────────────────────────────


def test_default_sampling_params():
    p = SamplingParams()
    assert p.temperature == 0.9
    assert p.top_k == 5


def test_sampling_param_validation():
    with pytest.raises(ValueError):
        SamplingParams(temperature=-0.1)
    with pytest.raises(ValueError):
        SamplingParams(top_k=0)
    with pytest.raises(ValueError):
        SamplingParams(top_p=1.5)


def test_payload_omits_absent_fields():
    p = SamplingParams(temperature=0.7, top_k=None, max_tokens=64)
    payload = p.to_payload()
    assert payload == {"temperature": 0.7, "max_tokens": 64}
    with_seed = SamplingParams(seed=42).to_payload()
    assert with_seed["seed"] == 42


# ── mock provider ─────────────────────────────────────────────────────────────


def test_mock_exact_and_prefix_matching(tmp_path):
    script = tmp_path / "script.jsonl"
    script.write_text(
        json.dumps({"match": "exact", "prompt": "你好", "responses": ["世界"]}, ensure_ascii=False)
        + "\n"
        + json.dumps({"match": "prefix", "prompt": "帮我", "responses": ["甲", "乙"]}, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )
    provider = MockProvider.from_script(script)
    params = SamplingParams()
    assert provider.complete("你好", params) == "世界"
    assert provider.complete("帮我生成问题", params) == "甲"
    assert provider.complete("帮我做别的", params) == "乙"
    assert provider.complete("帮我再来", params) == "甲"  # round-robin wraps


def test_mock_no_match_raises():
    provider = MockProvider([ScriptEntry(match="exact", prompt="a", responses=["b"])])
    with pytest.raises(ProviderError):
        provider.complete("unmatched", SamplingParams())


def test_mock_records_call_log():
    provider = MockProvider([ScriptEntry(match="prefix", prompt="", responses=["x"])])
    params = SamplingParams(seed=1)
    provider.complete("one", params)
    provider.complete("two", params)
    assert [c[0] for c in provider.call_log] == ["one", "two"]


def test_mock_bad_script_rejected(tmp_path):
    script = tmp_path / "bad.jsonl"
    script.write_text('{"match": "fuzzy", "prompt": "a", "responses": ["b"]}\n', encoding="utf-8")
    with pytest.raises(ProviderError):
        MockProvider.from_script(script)


def test_mock_provider_id_is_content_hash(tmp_path):
    script = tmp_path / "script.jsonl"
    script.write_text('{"match": "exact", "prompt": "a", "responses": ["b"]}\n', encoding="utf-8")
    p1 = MockProvider.from_script(script)
    p2 = MockProvider.from_script(script)
    assert p1.provider_id == p2.provider_id
    assert p1.provider_id.startswith("mock:")


# ── http provider wire contract ───────────────────────────────────────────────


class _Handler(BaseHTTPRequestHandler):
    requests_seen: list[dict] = []
    response_code = 200
    response_body: dict | str = {"text": "回复"}

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).requests_seen.append(
            {"path": self.path, "body": body, "auth": self.headers.get("Authorization")}
        )
        payload = self.response_body
        data = payload.encode() if isinstance(payload, str) else json.dumps(payload).encode()
        self.send_response(self.response_code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # silence
        pass


@pytest.fixture
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.requests_seen = []
    _Handler.response_code = 200
    _Handler.response_body = {"text": "回复"}
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_http_provider_request_shape(http_server):
    provider = HTTPCompletionProvider(http_server, token="sekrit")
    params = SamplingParams(temperature=0.9, top_k=5, max_tokens=128, seed=7)
    text = provider.complete("提示词", params)
    assert text == "回复"
    seen = _Handler.requests_seen[0]
    assert seen["path"] == "/v1/complete"
    assert seen["auth"] == "Bearer sekrit"
    assert seen["body"] == {
        "prompt": "提示词",
        "temperature": 0.9,
        "top_k": 5,
        "max_tokens": 128,
        "seed": 7,
    }


def test_http_provider_non_2xx_is_failure(http_server):
    _Handler.response_code = 500
    provider = HTTPCompletionProvider(http_server)
    with pytest.raises(ProviderError):
        provider.complete("x", SamplingParams())


def test_http_provider_missing_text_is_failure(http_server):
    _Handler.response_body = {"nope": 1}
    provider = HTTPCompletionProvider(http_server)
    with pytest.raises(ProviderError):
        provider.complete("x", SamplingParams())


def test_http_provider_unreachable_is_failure():
    provider = HTTPCompletionProvider("http://127.0.0.1:1", timeout=0.2)
    with pytest.raises(ProviderError):
        provider.complete("x", SamplingParams())
