"""Interaction telemetry: append-only event log and content-addressed snapshots.

Every user/system action is a timestamped event; artifacts (spec, suites,
functions, reports, advice) are stored once under their SHA-256 and events
reference them by hash. Rapid duplicate clicks are filtered at logging time
and counted, so process metrics are not inflated by double-clicks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ClosedLogError, ConfigurationError
from .hashing import sha256_text

ACTIONS = (
    "session_start",
    "spec_loaded",
    "produce_suite",
    "explain_test",
    "regenerate_test",
    "delete_test",
    "edit_test",
    "regenerate_suite",
    "ask_function",
    "regenerate_function",
    "run_tests",
    "advice_generated",
    "function_viewed",
    "session_end",
)

ACTORS = ("user", "system")

ARTIFACT_KINDS = ("spec", "suite", "function", "advice", "report", "explanation")

# Default debounce window for duplicate user clicks; configurable, and the
# active value is recorded in every exported bundle.
DEFAULT_DEBOUNCE_SECONDS = 0.300

FAMILIARITY_LEVELS = ("none", "low", "medium", "high")
LLM_USE_LEVELS = ("never", "occasionally", "frequently")


@dataclass(frozen=True)
class TokenUsage:
    prompt: int
    completion: int

    @property
    def total(self) -> int:
        return self.prompt + self.completion


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    t: float
    session_id: str
    actor: str
    action: str
    target: str | None = None
    payload_hash: str | None = None
    tokens: TokenUsage | None = None

    def __post_init__(self) -> None:
        if self.actor not in ACTORS:
            raise ConfigurationError(f"unknown actor {self.actor!r}")
        if self.action not in ACTIONS:
            raise ConfigurationError(f"unknown action {self.action!r}")

    def to_json_line(self) -> str:
        obj = {
            "seq": self.seq,
            "t": self.t,
            "session_id": self.session_id,
            "actor": self.actor,
            "action": self.action,
            "target": self.target,
            "payload_hash": self.payload_hash,
            "tokens": {"prompt": self.tokens.prompt, "completion": self.tokens.completion} if self.tokens else None,
        }
        return json.dumps(obj, ensure_ascii=False)

    @staticmethod
    def from_json_line(line: str) -> "SessionEvent":
        obj = json.loads(line)
        tokens = obj.get("tokens")
        return SessionEvent(
            seq=obj["seq"],
            t=obj["t"],
            session_id=obj["session_id"],
            actor=obj["actor"],
            action=obj["action"],
            target=obj.get("target"),
            payload_hash=obj.get("payload_hash"),
            tokens=TokenUsage(prompt=tokens["prompt"], completion=tokens["completion"]) if tokens else None,
        )


@dataclass(frozen=True)
class ParticipantProfile:
    """Pseudonymized participant record; never holds direct identifiers."""

    participant_id: str
    programming_experience_years: int = 0
    python_familiarity: str = "none"
    prior_tdd_experience: str = "none"
    prior_llm_codegen_use: str = "never"
    post_task_likert: tuple[int, ...] = ()
    post_task_free_text: str = ""

    def __post_init__(self) -> None:
        if self.python_familiarity not in FAMILIARITY_LEVELS:
            raise ConfigurationError(f"python_familiarity must be one of {FAMILIARITY_LEVELS}")
        if self.prior_tdd_experience not in FAMILIARITY_LEVELS:
            raise ConfigurationError(f"prior_tdd_experience must be one of {FAMILIARITY_LEVELS}")
        if self.prior_llm_codegen_use not in LLM_USE_LEVELS:
            raise ConfigurationError(f"prior_llm_codegen_use must be one of {LLM_USE_LEVELS}")
        if any(not 1 <= item <= 5 for item in self.post_task_likert):
            raise ConfigurationError("post-task Likert items must be integers in 1..5")

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "programming_experience_years": self.programming_experience_years,
            "python_familiarity": self.python_familiarity,
            "prior_tdd_experience": self.prior_tdd_experience,
            "prior_llm_codegen_use": self.prior_llm_codegen_use,
            "post_task": {
                "likert_items": list(self.post_task_likert),
                "free_text": self.post_task_free_text,
            },
        }

    @staticmethod
    def from_dict(obj: dict) -> "ParticipantProfile":
        post = obj.get("post_task") or {}
        return ParticipantProfile(
            participant_id=obj["participant_id"],
            programming_experience_years=int(obj.get("programming_experience_years", 0)),
            python_familiarity=obj.get("python_familiarity", "none"),
            prior_tdd_experience=obj.get("prior_tdd_experience", "none"),
            prior_llm_codegen_use=obj.get("prior_llm_codegen_use", "never"),
            post_task_likert=tuple(post.get("likert_items", ())),
            post_task_free_text=post.get("free_text", ""),
        )


class EventLog:
    """Per-session append-only log with duplicate-click filtering.

    Accepted events get a gapless, strictly increasing ``seq``. A user event
    with the same (action, target) as the immediately preceding accepted
    user event, within the debounce window, is dropped and counted instead.
    Optionally mirrors accepted events to a durable JSONL file as they land.
    """

    def __init__(
        self,
        session_id: str,
        *,
        debounce_seconds: float = DEFAULT_DEBOUNCE_SECONDS,
        durable_path: str | Path | None = None,
    ):
        self.session_id = session_id
        self.debounce_seconds = debounce_seconds
        self.events: list[SessionEvent] = []
        self.dropped_count = 0
        self.closed = False
        self._last_user: SessionEvent | None = None
        self._durable_path = Path(durable_path) if durable_path else None
        if self._durable_path:
            self._durable_path.parent.mkdir(parents=True, exist_ok=True)

    def would_debounce(self, actor: str, action: str, target: str | None, t: float) -> bool:
        if actor != "user" or self._last_user is None:
            return False
        last = self._last_user
        return last.action == action and last.target == target and (t - last.t) <= self.debounce_seconds

    def count_drop(self) -> None:
        self.dropped_count += 1

    def record(self, event: SessionEvent) -> bool:
        """Append the event unless debounced; returns the accepted flag."""
        if self.closed:
            raise ClosedLogError(f"session {self.session_id} log is closed")
        if event.session_id != self.session_id:
            raise ConfigurationError("event session_id does not match this log")
        if self.would_debounce(event.actor, event.action, event.target, event.t):
            self.count_drop()
            return False
        event = replace(event, seq=len(self.events) + 1)
        self.events.append(event)
        if event.actor == "user":
            self._last_user = event
        if self._durable_path:
            with self._durable_path.open("a", encoding="utf-8") as fh:
                fh.write(event.to_json_line() + "\n")
        return True

    def close(self) -> None:
        self.closed = True

    def to_jsonl(self) -> str:
        return "".join(e.to_json_line() + "\n" for e in self.events)

    def total_tokens(self) -> int:
        return sum(e.tokens.total for e in self.events if e.tokens is not None)


def read_events_jsonl(text: str) -> list[SessionEvent]:
    return [SessionEvent.from_json_line(line) for line in text.splitlines() if line.strip()]


class ArtifactStore:
    """Content-addressed text snapshots: one file per SHA-256, idempotent.

    Write failures propagate: losing an artifact would break the log's hash
    closure, so integrity wins over availability.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def snapshot(self, artifact_text: str, kind: str) -> str:
        if kind not in ARTIFACT_KINDS:
            raise ConfigurationError(f"unknown artifact kind {kind!r}")
        digest = sha256_text(artifact_text)
        path = self.root / digest
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_text(artifact_text, encoding="utf-8")
            tmp.rename(path)
        return digest

    def read(self, digest: str) -> str:
        return (self.root / digest).read_text(encoding="utf-8")

    def exists(self, digest: str) -> bool:
        return (self.root / digest).exists()


EMAIL_PATTERN = r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"


def scan_text_for_identifiers(text: str, patterns: list[str]) -> list[str]:
    hits = []
    for pattern in patterns:
        for match in re.finditer(pattern, text):
            hits.append(match.group(0))
    return hits
