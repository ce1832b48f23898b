from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from specfirst.errors import BackendProtocolError, ExtractionError, FixtureMissError, TransportError
from specfirst.gateway import (
    Gateway,
    GenerationParams,
    GenerationRequest,
    LiveBackend,
    PromptLibrary,
    QueueBackend,
    RecordingBackend,
    ReplayBackend,
    extract_function_source,
    extract_tests,
    request_hash,
    write_fixture,
    BackendReply,
)

PARAMS = GenerationParams(model_id="m", temperature=0.0, seed=1, max_tokens=64)


def req(prompt="hello", kind="suite"):
    return GenerationRequest(kind=kind, prompt=prompt, params=PARAMS)


# --- replay backend ---------------------------------------------------------

def test_replay_returns_fixture_byte_identical(tmp_path):
    request = req()
    write_fixture(tmp_path, request, BackendReply(output_text="canned", prompt_tokens=3, completion_tokens=5))
    backend = ReplayBackend(tmp_path)
    first = backend.generate(request)
    second = backend.generate(request)
    assert first == second
    assert first.output_text == "canned"
    assert (first.prompt_tokens, first.completion_tokens) == (3, 5)


def test_replay_miss_names_request_hash(tmp_path):
    backend = ReplayBackend(tmp_path)
    request = req("nothing stored")
    with pytest.raises(FixtureMissError) as excinfo:
        backend.generate(request)
    assert excinfo.value.request_hash == request_hash(request)


def test_request_hash_depends_on_kind_prompt_and_params(tmp_path):
    base = req()
    assert request_hash(base) != request_hash(req(kind="function"))
    assert request_hash(base) != request_hash(req(prompt="other"))
    other_params = GenerationParams(model_id="m", temperature=0.5, seed=1, max_tokens=64)
    assert request_hash(base) != request_hash(GenerationRequest("suite", "hello", other_params))


def test_recording_backend_feeds_replay(tmp_path):
    inner = QueueBackend(["answer"])
    recorder = RecordingBackend(inner, tmp_path)
    request = req("record me")
    recorded = recorder.generate(request)
    replayed = ReplayBackend(tmp_path).generate(request)
    assert replayed == recorded


# --- live backend against a scripted local server --------------------------

class _Handler(BaseHTTPRequestHandler):
    script: list[tuple[int, dict]] = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        status, body = self.script.pop(0) if self.script else (200, {})
        payload = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def fixture_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


def _chat_body(text="ok", prompt_tokens=120, completion_tokens=340):
    return {
        "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


def test_live_backend_sums_usage_tokens(fixture_server):
    _Handler.script = [(200, _chat_body())]
    backend = LiveBackend(f"http://127.0.0.1:{fixture_server.server_port}/v1")
    result = Gateway(backend).generate(req())
    assert result.prompt_tokens == 120
    assert result.completion_tokens == 340
    assert result.total_tokens == 460


def test_live_backend_retries_server_errors(fixture_server):
    _Handler.script = [(500, {}), (200, _chat_body("after retry"))]
    backend = LiveBackend(f"http://127.0.0.1:{fixture_server.server_port}/v1", retry_wait_seconds=0.0)
    assert backend.generate(req()).output_text == "after retry"


def test_live_backend_protocol_error_on_bad_shape(fixture_server):
    _Handler.script = [(200, {"unexpected": True})]
    backend = LiveBackend(f"http://127.0.0.1:{fixture_server.server_port}/v1")
    with pytest.raises(BackendProtocolError):
        backend.generate(req())


def test_live_backend_unreachable_is_transport_error():
    backend = LiveBackend("http://127.0.0.1:9", max_attempts=2, retry_wait_seconds=0.0)
    with pytest.raises(TransportError):
        backend.generate(req())


# --- extraction -------------------------------------------------------------

THREE_TESTS = """Some prose before.

```python
import math

def helper():
    return 1

def test_alpha():
    assert helper() == 1

def test_beta():
    assert 2 > 1

def test_gamma():
    assert math.isfinite(0.0) or True
```

And prose after.
"""


def test_extracts_three_tests_in_source_order():
    tests = extract_tests(THREE_TESTS)
    assert [t.name for t in tests] == ["test_alpha", "test_beta", "test_gamma"]
    assert tests[0].body.startswith("def test_alpha")


def test_non_test_top_level_code_is_ignored():
    names = {t.name for t in extract_tests(THREE_TESTS)}
    assert "helper" not in names


def test_no_code_block_is_extraction_error():
    with pytest.raises(ExtractionError) as excinfo:
        extract_tests("no fences here at all")
    assert excinfo.value.raw_text == "no fences here at all"


def test_code_block_without_tests_is_extraction_error():
    with pytest.raises(ExtractionError):
        extract_tests("```python\nx = 1\n```")


def test_unparseable_block_is_extraction_error():
    with pytest.raises(ExtractionError):
        extract_tests("```python\ndef test_broken(:\n```")


def test_identical_bodies_share_test_id():
    text = "```python\ndef test_a():\n    assert True\n```"
    first = extract_tests(text)[0]
    second = extract_tests(text)[0]
    assert first.test_id == second.test_id


def test_extract_function_source_takes_first_block():
    text = "intro\n```python\ndef f():\n    return 1\n```\n```python\nsecond block\n```"
    assert extract_function_source(text) == "def f():\n    return 1\n"


# --- prompt library ---------------------------------------------------------

def test_prompt_hashes_cover_all_kinds():
    hashes = PromptLibrary().hashes()
    assert sorted(hashes) == sorted(
        ["suite", "single_test", "explain_test", "function", "regenerate_function", "advice"]
    )
    assert all(len(h) == 64 for h in hashes.values())


def test_prompt_rendering_is_deterministic(two_sum_spec):
    from specfirst.specmodel import render_for_prompt

    library = PromptLibrary()
    text = render_for_prompt(two_sum_spec)
    assert library.suite_prompt(text) == library.suite_prompt(text)
    assert "two_sum" in library.function_prompt(text, "def test_a(): pass")


def test_dollar_signs_in_values_pass_through():
    library = PromptLibrary()
    rendered = library.function_prompt("cost is $5", "assert price == '$9'")
    assert "$5" in rendered
    assert "$9" in rendered
