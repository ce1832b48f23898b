"""Workflow state machine: spec -> produce suite -> curate -> generate -> execute.

Phases:

    spec_loaded --produce_suite--> suite_produced
    suite_produced / curating / executed --curation action--> curating
    suite_produced / curating / executed --ask_function--> function_generated
    function_generated --auto-execute--> executed | completed (all tests pass)
    any non-terminal phase --budget expiry--> expired

Completed and expired are terminal: no mutating operation is accepted and
the event log is closed. A session finishes when the function passes every
test or the time budget elapses, whichever comes first.

Curation (and suite re-production) is allowed from ``executed`` because the
iterate step offers exactly that choice after a failing run: refine the
tests or regenerate the function.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .clock import Clock
from .errors import (
    BudgetExpiredError,
    ConfigurationError,
    ExtractionError,
    HarnessError,
    LastTestError,
    PhaseError,
    RunnerEnvironmentError,
    TerminalSessionError,
    UnknownTestError,
)
from .gateway import (
    GenerationParams,
    GenerationRequest,
    Gateway,
    PromptLibrary,
    extract_function_source,
    extract_tests,
    split_test_functions,
)
from .harness import (
    DEFAULT_PROFILE,
    ExecutionLimits,
    ExecutionReport,
    FunctionArtifact,
    RunnerProfile,
    TestCase,
    TestSuite,
    execute,
    suite_source,
)
from .hashing import canonical_json
from .metrics import SessionMetrics, has_interruption_gap, test_diversity
from .specmodel import ProblemSpec, render_for_prompt
from .taskbank import Assignment
from .telemetry import ArtifactStore, EventLog, ParticipantProfile, SessionEvent, TokenUsage

PHASES = ("spec_loaded", "suite_produced", "curating", "function_generated", "executed", "completed", "expired")
TERMINAL_PHASES = ("completed", "expired")
CURATING_CAPABLE = ("suite_produced", "curating", "executed")
OUTCOMES = ("pending", "all_pass", "budget_expired")

CURATION_KINDS = ("explain", "regenerate_test", "delete_test", "regenerate_suite", "edit_test")
_TARGETED_KINDS = ("explain", "regenerate_test", "delete_test", "edit_test")

# Curation kind -> logged event action.
_CURATION_EVENTS = {
    "explain": "explain_test",
    "regenerate_test": "regenerate_test",
    "delete_test": "delete_test",
    "edit_test": "edit_test",
    "regenerate_suite": "regenerate_suite",
}

DEFAULT_BUDGET_SECONDS = 2400.0  # 40 minutes


@dataclass(frozen=True)
class CurationAction:
    kind: str
    target_test_id: str | None = None
    guidance: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in CURATION_KINDS:
            raise ConfigurationError(f"unknown curation kind {self.kind!r}")
        if self.kind in _TARGETED_KINDS and not self.target_test_id:
            raise ConfigurationError(f"curation kind {self.kind!r} requires target_test_id")
        if self.kind == "regenerate_suite" and self.target_test_id:
            raise ConfigurationError("regenerate_suite does not take a target_test_id")
        if self.kind == "edit_test" and not (self.guidance or "").strip():
            raise ConfigurationError("edit_test requires the replacement test source in guidance")


@dataclass
class SessionCounters:
    """Live mirrors of the process metrics, kept independently of the log."""

    suite_productions: int = 0
    test_edits: int = 0
    advice_triggers: int = 0
    function_generations: int = 0
    generations_at_first_pass: int | None = None
    runs: int = 0
    total_tokens: int = 0


@dataclass
class Session:
    session_id: str
    participant_id: str
    task_id: str
    spec: ProblemSpec
    budget_seconds: float
    started_at: float
    log: EventLog
    suite: TestSuite | None = None
    function: FunctionArtifact | None = None
    last_report: ExecutionReport | None = None
    phase: str = "spec_loaded"
    outcome: str = "pending"
    first_suite_at: float | None = None
    first_all_pass_at: float | None = None
    advice_history: list[str] = field(default_factory=list)
    counters: SessionCounters = field(default_factory=SessionCounters)
    rejections: int = 0
    profile: ParticipantProfile | None = None
    assignment: Assignment | None = None
    config_info: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def remaining_budget(self, now: float) -> float:
        return max(0.0, self.budget_seconds - (now - self.started_at))

    @property
    def terminal(self) -> bool:
        return self.phase in TERMINAL_PHASES


@dataclass(frozen=True)
class OpResult:
    """Uniform return shape for engine operations."""

    debounced: bool = False
    suite: TestSuite | None = None
    report: ExecutionReport | None = None
    text: str | None = None


class SessionEngine:
    """Owns all session mutations; callers serialize access per session."""

    def __init__(
        self,
        gateway: Gateway,
        prompts: PromptLibrary,
        params: GenerationParams,
        clock: Clock,
        store: ArtifactStore,
        *,
        runner_profile: RunnerProfile = DEFAULT_PROFILE,
        limits: ExecutionLimits = ExecutionLimits(),
        executor=None,
    ):
        self.gateway = gateway
        self.prompts = prompts
        self.params = params
        self.clock = clock
        self.store = store
        self.runner_profile = runner_profile
        self.limits = limits
        # Injectable for tests; the default runs the real sandboxed harness.
        self._executor = executor or (lambda suite, function: execute(suite, function, runner_profile, limits))

    # -- session lifecycle --------------------------------------------------

    def create_session(
        self,
        *,
        session_id: str,
        participant_id: str,
        task_id: str,
        spec: ProblemSpec,
        budget_seconds: float = DEFAULT_BUDGET_SECONDS,
        debounce_seconds: float | None = None,
        durable_path=None,
        profile: ParticipantProfile | None = None,
        assignment: Assignment | None = None,
    ) -> Session:
        now = self.clock.now()
        log_kwargs = {}
        if debounce_seconds is not None:
            log_kwargs["debounce_seconds"] = debounce_seconds
        log = EventLog(session_id, durable_path=durable_path, **log_kwargs)
        session = Session(
            session_id=session_id,
            participant_id=participant_id,
            task_id=task_id,
            spec=spec,
            budget_seconds=budget_seconds,
            started_at=now,
            log=log,
            profile=profile,
            assignment=assignment,
        )
        session.config_info = {
            "prompt_hashes": self.prompts.hashes(),
            "generation_params": {
                "model_id": self.params.model_id,
                "temperature": self.params.temperature,
                "seed": self.params.seed,
                "max_tokens": self.params.max_tokens,
            },
            "backend_id": self.gateway.backend.backend_id,
            "runner_profile": self.runner_profile.name,
            "budget_seconds": budget_seconds,
            "debounce_seconds": log.debounce_seconds,
        }
        spec_hash = self.store.snapshot(spec.raw_source, "spec")
        log.record(SessionEvent(seq=0, t=now, session_id=session_id, actor="system", action="session_start"))
        log.record(
            SessionEvent(
                seq=0, t=now, session_id=session_id, actor="system", action="spec_loaded", payload_hash=spec_hash
            )
        )
        return session

    # -- gates ---------------------------------------------------------------

    def _gate(self, session: Session, now: float) -> None:
        if session.phase == "completed":
            session.rejections += 1
            raise TerminalSessionError("session is completed; no further actions accepted")
        if session.phase == "expired":
            session.rejections += 1
            raise BudgetExpiredError("session budget has expired")
        if now - session.started_at >= session.budget_seconds:
            self._expire(session, now)
            session.rejections += 1
            raise BudgetExpiredError("session budget has expired")

    def _expire(self, session: Session, now: float) -> None:
        session.phase = "expired"
        session.outcome = "budget_expired"
        session.log.record(
            SessionEvent(seq=0, t=now, session_id=session.session_id, actor="system", action="session_end")
        )
        session.log.close()

    def _complete(self, session: Session, now: float) -> None:
        session.phase = "completed"
        session.outcome = "all_pass"
        session.log.record(
            SessionEvent(seq=0, t=now, session_id=session.session_id, actor="system", action="session_end")
        )
        session.log.close()

    def _generate(self, session: Session, kind: str, prompt: str):
        result = self.gateway.generate(GenerationRequest(kind=kind, prompt=prompt, params=self.params))
        session.counters.total_tokens += result.total_tokens
        return result

    def _record_user(
        self,
        session: Session,
        action: str,
        t: float,
        *,
        target: str | None = None,
        payload_hash: str | None = None,
        tokens: TokenUsage | None = None,
    ) -> None:
        session.log.record(
            SessionEvent(
                seq=0,
                t=t,
                session_id=session.session_id,
                actor="user",
                action=action,
                target=target,
                payload_hash=payload_hash,
                tokens=tokens,
            )
        )

    def _spec_text(self, session: Session) -> str:
        return render_for_prompt(session.spec)

    def _suite_text(self, session: Session) -> str:
        assert session.suite is not None
        return suite_source(session.suite, self.runner_profile)

    def _snapshot_suite(self, session: Session) -> str:
        return self.store.snapshot(self._suite_text(session), "suite")

    # -- operations -----------------------------------------------------------

    def produce_suite(self, session: Session, guidance: str = "") -> OpResult:
        """Generate a fresh full suite from the specification."""
        now = self.clock.now()
        self._gate(session, now)
        if session.phase not in ("spec_loaded",) + CURATING_CAPABLE:
            raise PhaseError(f"cannot produce a suite in phase {session.phase}")
        if session.log.would_debounce("user", "produce_suite", None, now):
            session.log.count_drop()
            return OpResult(debounced=True, suite=session.suite)

        result = self._generate(session, "suite", self.prompts.suite_prompt(self._spec_text(session), guidance))
        extracted = extract_tests(result.output_text, test_prefix=self.runner_profile.test_prefix)
        tests: list[TestCase] = []
        seen: set[str] = set()
        for item in extracted:
            case = TestCase.from_body(item.name, item.body, origin="generated", created_at=now)
            if case.test_id in seen:
                continue
            seen.add(case.test_id)
            tests.append(case)
        version = (session.suite.suite_version if session.suite else 0) + 1
        session.suite = TestSuite(suite_version=version, tests=tuple(tests), spec_hash=session.spec.source_hash)
        if session.first_suite_at is None:
            session.first_suite_at = now
        session.phase = "suite_produced"
        session.counters.suite_productions += 1
        self._record_user(
            session,
            "produce_suite",
            now,
            payload_hash=self._snapshot_suite(session),
            tokens=TokenUsage(result.prompt_tokens, result.completion_tokens),
        )
        return OpResult(suite=session.suite)

    def curate(self, session: Session, action: CurationAction) -> OpResult:
        """Apply one per-test action or a full-suite regeneration."""
        now = self.clock.now()
        self._gate(session, now)
        if session.suite is None or session.phase not in CURATING_CAPABLE:
            raise PhaseError(f"cannot curate tests in phase {session.phase}")

        event_action = _CURATION_EVENTS[action.kind]
        if session.log.would_debounce("user", event_action, action.target_test_id, now):
            session.log.count_drop()
            return OpResult(debounced=True, suite=session.suite)

        target: TestCase | None = None
        if action.kind in _TARGETED_KINDS:
            target = session.suite.find(action.target_test_id or "")
            if target is None:
                raise UnknownTestError(f"no test with id {action.target_test_id}")

        if action.kind == "explain":
            result = self._generate(
                session, "explain_test", self.prompts.explain_test_prompt(self._spec_text(session), target.body)
            )
            payload = self.store.snapshot(result.output_text, "explanation")
            session.phase = "curating"
            session.counters.test_edits += 1
            self._record_user(
                session,
                event_action,
                now,
                target=target.test_id,
                payload_hash=payload,
                tokens=TokenUsage(result.prompt_tokens, result.completion_tokens),
            )
            return OpResult(suite=session.suite, text=result.output_text)

        tokens: TokenUsage | None = None
        if action.kind == "delete_test":
            if len(session.suite.tests) == 1:
                raise LastTestError("cannot delete the last remaining test; the suite must stay non-empty")
            new_tests = [t for t in session.suite.tests if t.test_id != target.test_id]
        elif action.kind == "edit_test":
            new_case = self._parse_user_test(action.guidance or "", now)
            new_tests = self._replace_test(session.suite, target.test_id, new_case)
        elif action.kind == "regenerate_test":
            result = self._generate(
                session,
                "single_test",
                self.prompts.single_test_prompt(
                    self._spec_text(session), self._suite_text(session), target.body, action.guidance or ""
                ),
            )
            tokens = TokenUsage(result.prompt_tokens, result.completion_tokens)
            extracted = extract_tests(result.output_text, test_prefix=self.runner_profile.test_prefix)
            new_case = TestCase.from_body(extracted[0].name, extracted[0].body, origin="regenerated", created_at=now)
            new_tests = self._replace_test(session.suite, target.test_id, new_case)
        else:  # regenerate_suite
            result = self._generate(
                session, "suite", self.prompts.suite_prompt(self._spec_text(session), action.guidance or "")
            )
            tokens = TokenUsage(result.prompt_tokens, result.completion_tokens)
            extracted = extract_tests(result.output_text, test_prefix=self.runner_profile.test_prefix)
            new_tests = []
            seen: set[str] = set()
            for item in extracted:
                case = TestCase.from_body(item.name, item.body, origin="generated", created_at=now)
                if case.test_id not in seen:
                    seen.add(case.test_id)
                    new_tests.append(case)

        session.suite = TestSuite(
            suite_version=session.suite.suite_version + 1,
            tests=tuple(new_tests),
            spec_hash=session.suite.spec_hash,
        )
        session.phase = "curating"
        if action.kind == "regenerate_suite":
            session.counters.suite_productions += 1
        else:
            session.counters.test_edits += 1
        self._record_user(
            session,
            event_action,
            now,
            target=action.target_test_id,
            payload_hash=self._snapshot_suite(session),
            tokens=tokens,
        )
        return OpResult(suite=session.suite)

    def _parse_user_test(self, source: str, now: float) -> TestCase:
        tests = split_test_functions(source, test_prefix=self.runner_profile.test_prefix)
        if len(tests) != 1:
            raise ExtractionError(
                f"edited test must be exactly one top-level {self.runner_profile.test_prefix}* function "
                f"(found {len(tests)})",
                raw_text=source,
            )
        return TestCase.from_body(tests[0].name, tests[0].body, origin="user_edited", created_at=now)

    @staticmethod
    def _replace_test(suite: TestSuite, old_id: str, new_case: TestCase) -> list[TestCase]:
        other_ids = {t.test_id for t in suite.tests if t.test_id != old_id}
        if new_case.test_id in other_ids:
            raise ExtractionError("replacement test duplicates another test in the suite", raw_text=new_case.body)
        return [new_case if t.test_id == old_id else t for t in suite.tests]

    def ask_function(self, session: Session) -> OpResult:
        """Generate the implementation from the suite, then execute it."""
        return self._generate_function(session, "ask_function", use_advice=False)

    def regenerate_function(self, session: Session, use_advice: bool = False) -> OpResult:
        """Regenerate the implementation, optionally guided by the latest advice."""
        if session.function is None:
            raise PhaseError("no function has been generated yet")
        if use_advice and not session.advice_history:
            raise PhaseError("use_advice requested but no advice has been generated")
        return self._generate_function(session, "regenerate_function", use_advice=use_advice)

    def _generate_function(self, session: Session, action: str, *, use_advice: bool) -> OpResult:
        now = self.clock.now()
        self._gate(session, now)
        if session.phase not in CURATING_CAPABLE:
            raise PhaseError(f"cannot generate a function in phase {session.phase}")
        if session.suite is None or not session.suite.tests:
            raise PhaseError("cannot generate a function before a test suite exists")
        if session.log.would_debounce("user", action, None, now):
            session.log.count_drop()
            return OpResult(debounced=True, suite=session.suite, report=session.last_report)

        if action == "ask_function":
            prompt = self.prompts.function_prompt(self._spec_text(session), self._suite_text(session))
            kind = "function"
        else:
            advice = session.advice_history[-1] if use_advice else ""
            prompt = self.prompts.regenerate_function_prompt(
                self._spec_text(session), self._suite_text(session), session.function.source, advice
            )
            kind = "regenerate_function"

        result = self._generate(session, kind, prompt)
        source = extract_function_source(result.output_text)
        version = (session.function.function_version if session.function else 0) + 1
        artifact = FunctionArtifact.from_source(source, version=version, suite_version=session.suite.suite_version)
        payload = self.store.snapshot(source, "function")

        previous_phase = session.phase
        session.function = artifact
        session.phase = "function_generated"
        session.counters.function_generations += 1
        self._record_user(
            session,
            action,
            now,
            target=str(version),
            payload_hash=payload,
            tokens=TokenUsage(result.prompt_tokens, result.completion_tokens),
        )
        try:
            report = self._execute_current(session, now)
        except (HarnessError, RunnerEnvironmentError):
            session.phase = previous_phase
            raise
        return OpResult(suite=session.suite, report=report)

    def _execute_current(self, session: Session, now: float) -> ExecutionReport:
        assert session.suite is not None and session.function is not None
        report = self._executor(session.suite, session.function)
        names = {t.test_id: t.name for t in session.suite.tests}
        payload = self.store.snapshot(canonical_json(report.canonical_dict(names)), "report")
        session.last_report = report
        session.counters.runs += 1
        session.log.record(
            SessionEvent(
                seq=0,
                t=now,
                session_id=session.session_id,
                actor="system",
                action="run_tests",
                target=str(report.function_version),
                payload_hash=payload,
            )
        )
        if report.all_pass:
            if session.first_all_pass_at is None:
                session.first_all_pass_at = now
                session.counters.generations_at_first_pass = session.counters.function_generations
            self._complete(session, now)
        else:
            session.phase = "executed"
        return report

    def request_advice(self, session: Session) -> OpResult:
        """Generate debugging advice from the latest failing report."""
        now = self.clock.now()
        self._gate(session, now)
        if session.last_report is None or session.last_report.all_pass:
            raise PhaseError("advice requires a report with at least one failing test")
        if session.log.would_debounce("user", "advice_generated", None, now):
            session.log.count_drop()
            return OpResult(debounced=True, text=session.advice_history[-1] if session.advice_history else None)

        names = {t.test_id: t.name for t in (session.suite.tests if session.suite else ())}
        failures = "\n".join(
            f"- {names.get(r.test_id, r.test_id)}: {r.outcome}: {r.failure_message or ''}".rstrip()
            for r in session.last_report.failing()
        )
        assert session.function is not None
        result = self._generate(
            session, "advice", self.prompts.advice_prompt(self._spec_text(session), session.function.source, failures)
        )
        payload = self.store.snapshot(result.output_text, "advice")
        session.advice_history.append(result.output_text)
        session.counters.advice_triggers += 1
        self._record_user(
            session,
            "advice_generated",
            now,
            payload_hash=payload,
            tokens=TokenUsage(result.prompt_tokens, result.completion_tokens),
        )
        return OpResult(text=result.output_text)

    def record_view(self, session: Session) -> bool:
        """Log a function-viewed event; debounced like any user action."""
        now = self.clock.now()
        self._gate(session, now)
        target = str(session.function.function_version) if session.function else None
        if session.log.would_debounce("user", "function_viewed", target, now):
            session.log.count_drop()
            return False
        self._record_user(session, "function_viewed", now, target=target)
        return True

    def tick_budget(self, session: Session, now: float | None = None) -> str:
        """Expire the session once its budget has elapsed; completed is immune."""
        if now is None:
            now = self.clock.now()
        if session.phase in TERMINAL_PHASES:
            return session.phase
        if now - session.started_at >= session.budget_seconds:
            self._expire(session, now)
        return session.phase

    def close_session(self, session: Session) -> str:
        """Operator close: completed stays completed, anything else expires."""
        if session.terminal:
            return session.phase
        self._expire(session, self.clock.now())
        return session.phase


def live_session_metrics(session: Session, budget_seconds: float | None = None) -> SessionMetrics:
    """Metrics from the engine's in-memory counters (not from the log).

    Exists as an independent oracle: for any replayed session this must
    equal the log-derived computation.
    """
    budget = budget_seconds if budget_seconds is not None else session.budget_seconds
    c = session.counters
    report = session.last_report
    passed = session.outcome == "all_pass"
    if session.first_suite_at is None:
        time_to_pass = None
        budget_capped = False
        pass_rate = None
        coverage = None
        pass_all = 0
    else:
        pass_all = 1 if passed else 0
        pass_rate = report.pass_count / report.total_count if report and report.total_count else None
        coverage = report.coverage if report else None
        if passed and session.first_all_pass_at is not None:
            time_to_pass = session.first_all_pass_at - session.first_suite_at
            budget_capped = False
        else:
            time_to_pass = float(budget)
            budget_capped = True
    return SessionMetrics(
        pass_all=pass_all,
        pass_rate=pass_rate,
        test_coverage=coverage,
        test_diversity=test_diversity(session.suite) if session.suite is not None else None,
        time_to_pass=time_to_pass,
        iterations_to_pass=(
            c.generations_at_first_pass if c.generations_at_first_pass is not None else c.function_generations
        ),
        test_edits=c.test_edits,
        suite_regenerations=max(0, c.suite_productions - 1),
        advice_triggers=c.advice_triggers,
        total_tokens=c.total_tokens,
        budget_capped=budget_capped,
        interrupted_outlier=has_interruption_gap(session.log.events),
        warnings=(),
    )
