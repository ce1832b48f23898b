"""Local HTTP/JSON service exposing the session engine to the companion UI.

Localhost-only, no auth: the deployment target is a single-workstation
study seat. Every mutating endpoint writes telemetry before acknowledging;
concurrent mutations on one session get a busy response instead of queuing,
because the workflow is inherently sequential.
"""

from __future__ import annotations

import uuid
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles

from .bundle import export_from_engine
from .clock import Clock, WallClock
from .config import AppConfig, build_engine
from .engine import CurationAction, OpResult, Session, SessionEngine
from .errors import (
    BackendProtocolError,
    BudgetExpiredError,
    ConfigurationError,
    ExtractionError,
    FixtureMissError,
    HarnessError,
    LastTestError,
    NonTerminalExportError,
    PhaseError,
    RunnerEnvironmentError,
    SessionBusyError,
    SpecParseError,
    SpecValidationError,
    SpecfirstError,
    TerminalSessionError,
    TransportError,
    UnknownTestError,
)
from .specmodel import parse_spec
from .taskbank import AssignmentHistory, TaskPools, assign_tasks, build_pools, ingest_bank, spec_for_task
from .telemetry import ParticipantProfile

_STATUS_BY_ERROR = [
    (UnknownTestError, 404),
    (LastTestError, 409),
    (PhaseError, 409),
    (TerminalSessionError, 409),
    (BudgetExpiredError, 409),
    (SessionBusyError, 409),
    (NonTerminalExportError, 409),
    (SpecParseError, 422),
    (SpecValidationError, 422),
    (ExtractionError, 422),
    (ConfigurationError, 422),
    (FixtureMissError, 502),
    (TransportError, 502),
    (BackendProtocolError, 502),
    (HarnessError, 502),
    (RunnerEnvironmentError, 502),
]


def _status_for(exc: SpecfirstError) -> int:
    for err_type, status in _STATUS_BY_ERROR:
        if isinstance(exc, err_type):
            return status
    return 500


class SessionNotFound(SpecfirstError):
    pass


def session_view(session: Session, now: float) -> dict:
    """Redacted snapshot of one session; never leaks other sessions' data."""
    suite = None
    if session.suite is not None:
        suite = {
            "version": session.suite.suite_version,
            "tests": [
                {"test_id": t.test_id, "name": t.name, "body": t.body, "origin": t.origin}
                for t in session.suite.tests
            ],
        }
    function = None
    if session.function is not None:
        function = {"version": session.function.function_version, "source": session.function.source}
    report = None
    if session.last_report is not None:
        names = {t.test_id: t.name for t in (session.suite.tests if session.suite else ())}
        report = {
            "pass_count": session.last_report.pass_count,
            "total_count": session.last_report.total_count,
            "coverage": session.last_report.coverage,
            "all_pass": session.last_report.all_pass,
            "suite_version": session.last_report.suite_version,
            "function_version": session.last_report.function_version,
            "per_test": [
                {
                    "test_id": r.test_id,
                    "name": names.get(r.test_id, ""),
                    "outcome": r.outcome,
                    "message": r.failure_message,
                }
                for r in session.last_report.per_test
            ],
        }
    return {
        "session_id": session.session_id,
        "participant_id": session.participant_id,
        "task_id": session.task_id,
        "phase": session.phase,
        "outcome": session.outcome,
        "remaining_budget_seconds": session.remaining_budget(now),
        "budget_seconds": session.budget_seconds,
        "spec_document": session.spec.raw_source,
        "function_name": session.spec.function_name,
        "suite": suite,
        "function": function,
        "report": report,
        "advice": session.advice_history[-1] if session.advice_history else None,
        "event_seq": len(session.log.events),
        "dropped_events": session.log.dropped_count,
    }


class WorkbenchService:
    """Session registry plus assignment-history persistence."""

    def __init__(self, config: AppConfig, engine: SessionEngine, pools: TaskPools | None, clock: Clock):
        self.config = config
        self.engine = engine
        self.pools = pools
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        data_dir = Path(config.resolve(config.data_dir))
        self.history = AssignmentHistory.load(data_dir / "assignments.jsonl")
        self.export_dir = Path(config.resolve(config.export_dir))
        self.sessions_dir = data_dir / "sessions"

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session {session_id}")
        return session

    def create_session(self, body: dict) -> Session:
        participant_id = body.get("participant_id") or "p-anonymous"
        assignment = None
        if body.get("task_id"):
            if self.pools is None:
                raise ConfigurationError("no task bank configured")
            task_id = body["task_id"]
            task = next((t for t in (*self.pools.warmup, *self.pools.evaluation) if t.task_id == task_id), None)
            if task is None:
                raise ConfigurationError(f"task {task_id!r} is not in the configured pools")
        else:
            if self.pools is None:
                raise ConfigurationError("no task bank configured")
            seed = self.config.bank.assignment_seed + len(self.history.assignments)
            assignment = assign_tasks(
                self.pools, participant_id, self.history.assignments, seed, assigned_at=self.clock.now()
            )
            self.history.append(assignment)
            warmup = body.get("task") == "warmup"
            task_id = assignment.warmup_task if warmup else assignment.evaluation_task
            pool = self.pools.warmup if warmup else self.pools.evaluation
            task = next(t for t in pool if t.task_id == task_id)

        spec = parse_spec(body["spec_document"]) if body.get("spec_document") else spec_for_task(task)
        profile = ParticipantProfile.from_dict(body["profile"]) if body.get("profile") else None
        session_id = body.get("session_id") or f"s-{uuid.uuid4().hex[:12]}"
        if session_id in self.sessions:
            raise ConfigurationError(f"session id {session_id!r} already exists")
        session = self.engine.create_session(
            session_id=session_id,
            participant_id=participant_id,
            task_id=task_id,
            spec=spec,
            budget_seconds=float(body.get("budget_seconds", self.config.session.budget_seconds)),
            debounce_seconds=self.config.session.debounce_seconds,
            durable_path=self.sessions_dir / session_id / "events.jsonl",
            profile=profile,
            assignment=assignment,
        )
        self.sessions[session_id] = session
        return session


def create_app(
    config: AppConfig,
    *,
    engine: SessionEngine | None = None,
    clock: Clock | None = None,
    pools: TaskPools | None = None,
) -> FastAPI:
    clock = clock or WallClock()
    engine = engine or build_engine(config, clock=clock)
    if pools is None and config.bank.paths:
        records = ingest_bank(
            [config.resolve(p) for p in config.bank.paths],
            exclude_ids=config.bank.exclude_ids,
        )
        pools = build_pools(
            records, warmup_size=config.bank.warmup_size, evaluation_size=config.bank.evaluation_size
        )
    service = WorkbenchService(config, engine, pools, clock)

    app = FastAPI(title="specfirst workbench", version="1")
    app.state.service = service

    @app.exception_handler(SpecfirstError)
    async def on_error(request, exc: SpecfirstError):
        status = 404 if isinstance(exc, SessionNotFound) else _status_for(exc)
        return JSONResponse(status_code=status, content={"error": type(exc).__name__, "detail": str(exc)})

    def _locked(session: Session, fn) -> dict:
        if not session.lock.acquire(blocking=False):
            raise SessionBusyError("another operation is in flight for this session")
        try:
            return fn()
        finally:
            session.lock.release()

    def _op_response(session: Session, result: OpResult, **extra) -> dict:
        payload = {"debounced": result.debounced, "view": session_view(session, clock.now())}
        if result.text is not None:
            payload["text"] = result.text
        payload.update(extra)
        return payload

    @app.post("/sessions")
    def create_session(body: dict = Body(default={})):
        session = service.create_session(body)
        return {"view": session_view(session, clock.now())}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = service.get(session_id)
        if session.lock.acquire(blocking=False):
            try:
                engine.tick_budget(session)
            finally:
                session.lock.release()
        return {"view": session_view(session, clock.now())}

    @app.post("/sessions/{session_id}/suite")
    def produce_suite(session_id: str, body: dict = Body(default={})):
        session = service.get(session_id)
        guidance = body.get("guidance", "")

        def run():
            # A guided request against an existing suite is the regenerate-
            # whole-suite curation action; everything else is production.
            if guidance and session.suite is not None:
                action = CurationAction(kind="regenerate_suite", guidance=guidance)
                return _op_response(session, engine.curate(session, action))
            return _op_response(session, engine.produce_suite(session, guidance))

        return _locked(session, run)

    @app.post("/sessions/{session_id}/tests/{test_id}/explain")
    def explain_test(session_id: str, test_id: str):
        session = service.get(session_id)
        action = CurationAction(kind="explain", target_test_id=test_id)
        return _locked(session, lambda: _op_response(session, engine.curate(session, action)))

    @app.post("/sessions/{session_id}/tests/{test_id}/regenerate")
    def regenerate_test(session_id: str, test_id: str, body: dict = Body(default={})):
        session = service.get(session_id)
        action = CurationAction(kind="regenerate_test", target_test_id=test_id, guidance=body.get("guidance"))
        return _locked(session, lambda: _op_response(session, engine.curate(session, action)))

    @app.post("/sessions/{session_id}/tests/{test_id}/delete")
    def delete_test(session_id: str, test_id: str):
        session = service.get(session_id)
        action = CurationAction(kind="delete_test", target_test_id=test_id)
        return _locked(session, lambda: _op_response(session, engine.curate(session, action)))

    @app.put("/sessions/{session_id}/tests/{test_id}")
    def edit_test(session_id: str, test_id: str, body: dict = Body(...)):
        session = service.get(session_id)
        action = CurationAction(kind="edit_test", target_test_id=test_id, guidance=body.get("body", ""))
        return _locked(session, lambda: _op_response(session, engine.curate(session, action)))

    @app.post("/sessions/{session_id}/function")
    def generate_function(session_id: str, body: dict = Body(default={})):
        session = service.get(session_id)

        def run():
            if session.function is None:
                result = engine.ask_function(session)
            else:
                result = engine.regenerate_function(session, use_advice=bool(body.get("use_advice", False)))
            return _op_response(session, result)

        return _locked(session, run)

    @app.post("/sessions/{session_id}/advice")
    def request_advice(session_id: str):
        session = service.get(session_id)
        return _locked(session, lambda: _op_response(session, engine.request_advice(session)))

    @app.post("/sessions/{session_id}/events/view")
    def view_event(session_id: str):
        session = service.get(session_id)
        accepted = _locked(session, lambda: engine.record_view(session))
        return {"accepted": accepted, "view": session_view(session, clock.now())}

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: str):
        session = service.get(session_id)
        phase = _locked(session, lambda: engine.close_session(session))
        return {"phase": phase, "view": session_view(session, clock.now())}

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = service.get(session_id)
        bundle_dir = _locked(session, lambda: export_from_engine(session, engine.store, service.export_dir))
        return {"bundle_dir": str(bundle_dir)}

    ui_dir = config.resolve(config.service.ui_dir)
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return RedirectResponse(url="/ui/")

    return app


def serve(config: AppConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.service.host, port=config.service.port, log_level="info")
