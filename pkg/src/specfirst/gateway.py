"""Backend-agnostic generation client.

Six generation capabilities share one request shape; the wire backend is
selectable: ``live`` speaks the OpenAI-compatible chat-completions JSON
protocol over HTTP, ``replay`` serves stored fixtures keyed by the hash of
(kind, prompt, params) so any prompt drift surfaces as a fixture miss
instead of silent divergence.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import re
import string
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .errors import (
    BackendProtocolError,
    ConfigurationError,
    ExtractionError,
    FixtureMissError,
    TransportError,
)
from .hashing import sha256_json, sha256_text

log = logging.getLogger(__name__)

GENERATION_KINDS = ("suite", "single_test", "explain_test", "function", "regenerate_function", "advice")


@dataclass(frozen=True)
class GenerationParams:
    """Endpoint parameters, fixed once per session and never mutated."""

    model_id: str
    temperature: float = 0.0
    seed: int = 0
    max_tokens: int = 2048


@dataclass(frozen=True)
class GenerationRequest:
    kind: str
    prompt: str
    params: GenerationParams

    def __post_init__(self) -> None:
        if self.kind not in GENERATION_KINDS:
            raise ConfigurationError(f"unknown generation kind {self.kind!r}")


@dataclass(frozen=True)
class GenerationResult:
    output_text: str
    prompt_tokens: int
    completion_tokens: int
    latency_seconds: float
    backend_id: str

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


def request_hash(request: GenerationRequest) -> str:
    return sha256_json(
        {
            "kind": request.kind,
            "prompt": request.prompt,
            "params": {
                "model_id": request.params.model_id,
                "temperature": request.params.temperature,
                "seed": request.params.seed,
                "max_tokens": request.params.max_tokens,
            },
        }
    )


@dataclass(frozen=True)
class BackendReply:
    output_text: str
    prompt_tokens: int
    completion_tokens: int


class Backend(Protocol):
    backend_id: str

    def generate(self, request: GenerationRequest) -> BackendReply: ...


class ReplayBackend:
    """Deterministic stand-in returning stored fixtures by request hash."""

    def __init__(self, fixtures_dir: str | Path):
        self.fixtures_dir = Path(fixtures_dir)
        self.backend_id = "replay"

    def generate(self, request: GenerationRequest) -> BackendReply:
        h = request_hash(request)
        path = self.fixtures_dir / f"{h}.json"
        if not path.exists():
            raise FixtureMissError(h)
        obj = json.loads(path.read_text(encoding="utf-8"))
        return BackendReply(
            output_text=obj["output_text"],
            prompt_tokens=int(obj["prompt_tokens"]),
            completion_tokens=int(obj["completion_tokens"]),
        )


def write_fixture(fixtures_dir: str | Path, request: GenerationRequest, reply: BackendReply) -> str:
    """Store a fixture under its request hash; idempotent. Returns the hash."""
    fixtures_dir = Path(fixtures_dir)
    fixtures_dir.mkdir(parents=True, exist_ok=True)
    h = request_hash(request)
    payload = {
        "kind": request.kind,
        "output_text": reply.output_text,
        "prompt_tokens": reply.prompt_tokens,
        "completion_tokens": reply.completion_tokens,
    }
    (fixtures_dir / f"{h}.json").write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    return h


class RecordingBackend:
    """Wraps another backend and stores every reply as a replay fixture.

    Used to author fixture sets: run a session once against a scripted or
    live backend, then replay it forever.
    """

    def __init__(self, inner: Backend, fixtures_dir: str | Path):
        self.inner = inner
        self.fixtures_dir = Path(fixtures_dir)
        self.backend_id = f"record({inner.backend_id})"

    def generate(self, request: GenerationRequest) -> BackendReply:
        reply = self.inner.generate(request)
        write_fixture(self.fixtures_dir, request, reply)
        return reply


class QueueBackend:
    """Returns queued canned replies in order; for tests and fixture authoring."""

    def __init__(self, replies: list[str | BackendReply]):
        self._queue = list(replies)
        self.backend_id = "queue"

    def generate(self, request: GenerationRequest) -> BackendReply:
        if not self._queue:
            raise BackendProtocolError("queue backend exhausted")
        item = self._queue.pop(0)
        if isinstance(item, BackendReply):
            return item
        return BackendReply(
            output_text=item,
            prompt_tokens=max(1, len(request.prompt) // 4),
            completion_tokens=max(1, len(item) // 4),
        )


class LiveBackend:
    """OpenAI-compatible chat-completions client with bounded retries."""

    def __init__(
        self,
        endpoint: str,
        *,
        api_key: str = "",
        timeout_seconds: float = 120.0,
        max_attempts: int = 3,
        retry_wait_seconds: float = 0.5,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.timeout_seconds = timeout_seconds
        self.max_attempts = max_attempts
        self.retry_wait_seconds = retry_wait_seconds
        self.backend_id = f"live:{self.endpoint}"

    def _post(self, request: GenerationRequest) -> httpx.Response:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": request.params.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "seed": request.params.seed,
            "max_tokens": request.params.max_tokens,
        }
        return httpx.post(
            f"{self.endpoint}/chat/completions",
            json=body,
            headers=headers,
            timeout=self.timeout_seconds,
        )

    def generate(self, request: GenerationRequest) -> BackendReply:
        last_exc: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._post(request)
            except httpx.HTTPError as exc:
                last_exc = exc
                log.warning("backend transport error (attempt %d/%d): %s", attempt, self.max_attempts, exc)
                if attempt < self.max_attempts:
                    time.sleep(self.retry_wait_seconds * attempt)
                continue
            if response.status_code >= 500:
                last_exc = BackendProtocolError(f"server error {response.status_code}")
                if attempt < self.max_attempts:
                    time.sleep(self.retry_wait_seconds * attempt)
                continue
            if response.status_code != 200:
                raise BackendProtocolError(f"backend returned status {response.status_code}: {response.text[:500]}")
            try:
                obj = response.json()
                text = obj["choices"][0]["message"]["content"]
                usage = obj.get("usage", {})
                return BackendReply(
                    output_text=text,
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                )
            except (KeyError, IndexError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise BackendProtocolError(f"malformed backend response: {exc}") from exc
        raise TransportError(f"backend unreachable after {self.max_attempts} attempts: {last_exc}")


def backend_from_env_key(env_var: str) -> str:
    return os.environ.get(env_var, "")


class Gateway:
    """Thin accounting wrapper around a backend."""

    def __init__(self, backend: Backend):
        self.backend = backend

    def generate(self, request: GenerationRequest) -> GenerationResult:
        t0 = time.monotonic()
        reply = self.backend.generate(request)
        latency = time.monotonic() - t0
        if reply.prompt_tokens < 0 or reply.completion_tokens < 0:
            raise BackendProtocolError("negative token counts in backend reply")
        return GenerationResult(
            output_text=reply.output_text,
            prompt_tokens=reply.prompt_tokens,
            completion_tokens=reply.completion_tokens,
            latency_seconds=latency,
            backend_id=self.backend.backend_id,
        )


# --- output parsing -------------------------------------------------------

_FENCE_RE = re.compile(r"```[ \t]*[A-Za-z0-9_+.-]*[ \t]*\n(.*?)```", re.DOTALL)


def first_code_block(output_text: str) -> str:
    """Return the content of the first fenced code block."""
    match = _FENCE_RE.search(output_text)
    if match is None:
        raise ExtractionError("no fenced code block in generated output", raw_text=output_text)
    return match.group(1)


@dataclass(frozen=True)
class ExtractedTest:
    name: str
    body: str

    @property
    def test_id(self) -> str:
        return sha256_text(self.body)


def split_test_functions(source: str, *, test_prefix: str = "test") -> list[ExtractedTest]:
    """Split source into top-level test functions, in source order.

    Non-test top-level code (imports, helpers) is ignored; tests are expected
    to be self-contained, importing inside the function body when needed.
    """
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        raise ExtractionError(f"generated code block is not parseable: {exc}", raw_text=source)
    lines = source.splitlines()
    out: list[ExtractedTest] = []
    for node in tree.body:
        if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        if not node.name.startswith(test_prefix):
            continue
        start = min([node.lineno] + [d.lineno for d in node.decorator_list]) - 1
        end = node.end_lineno or node.lineno
        body = "\n".join(lines[start:end]).rstrip() + "\n"
        out.append(ExtractedTest(name=node.name, body=body))
    return out


def extract_tests(output_text: str, *, test_prefix: str = "test") -> list[ExtractedTest]:
    """Extract test functions from a suite/single-test generation output.

    Deterministic: first fenced code block, split at top-level test-function
    boundaries. Identical bodies yield identical test ids.
    """
    block = first_code_block(output_text)
    tests = split_test_functions(block, test_prefix=test_prefix)
    if not tests:
        raise ExtractionError("no test functions found in generated output", raw_text=output_text)
    return tests


def extract_function_source(output_text: str) -> str:
    """Extract the function implementation: the first fenced block, verbatim."""
    source = first_code_block(output_text)
    if not source.strip():
        raise ExtractionError("generated code block is empty", raw_text=output_text)
    return source


# --- prompt templates -----------------------------------------------------

TEMPLATE_NAMES = GENERATION_KINDS


class PromptLibrary:
    """Versioned prompt templates; their hashes are logged per session.

    Templates are plain text files using ``$placeholder`` substitution.
    Defaults ship with the package; a directory override swaps the whole set.
    """

    def __init__(self, templates_dir: str | Path | None = None):
        if templates_dir is None:
            templates_dir = Path(__file__).parent / "prompts"
        self.templates_dir = Path(templates_dir)
        self._templates: dict[str, string.Template] = {}
        self._raw: dict[str, str] = {}
        for name in TEMPLATE_NAMES:
            path = self.templates_dir / f"{name}.txt"
            if not path.exists():
                raise ConfigurationError(f"missing prompt template: {path}")
            raw = path.read_text(encoding="utf-8")
            self._raw[name] = raw
            self._templates[name] = string.Template(raw)

    def hashes(self) -> dict[str, str]:
        return {name: sha256_text(raw) for name, raw in sorted(self._raw.items())}

    def _render(self, name: str, **fields: str) -> str:
        return self._templates[name].substitute(**fields)

    def suite_prompt(self, spec_text: str, guidance: str = "") -> str:
        guidance_block = f"\nAdditional guidance from the user:\n{guidance}\n" if guidance else ""
        return self._render("suite", spec=spec_text, guidance=guidance_block)

    def single_test_prompt(self, spec_text: str, suite_source: str, test_body: str, guidance: str = "") -> str:
        guidance_block = f"\nAdditional guidance from the user:\n{guidance}\n" if guidance else ""
        return self._render(
            "single_test", spec=spec_text, suite=suite_source, test=test_body, guidance=guidance_block
        )

    def explain_test_prompt(self, spec_text: str, test_body: str) -> str:
        return self._render("explain_test", spec=spec_text, test=test_body)

    def function_prompt(self, spec_text: str, suite_source: str) -> str:
        return self._render("function", spec=spec_text, suite=suite_source)

    def regenerate_function_prompt(
        self, spec_text: str, suite_source: str, previous_source: str, advice: str = ""
    ) -> str:
        advice_block = f"\nAdvice derived from the failing tests:\n{advice}\n" if advice else ""
        return self._render(
            "regenerate_function",
            spec=spec_text,
            suite=suite_source,
            previous=previous_source,
            advice=advice_block,
        )

    def advice_prompt(self, spec_text: str, function_source: str, failures: str) -> str:
        return self._render("advice", spec=spec_text, function=function_source, failures=failures)
