"""Headless scripted sessions: deterministic end-to-end runs without a UI.

A script file is JSON:

    {
      "participant_id": "p-001",
      "task": "evaluation",            // or "warmup"
      "budget_seconds": 2400,          // optional override
      "step_seconds": 1.0,             // clock advance before each step
      "profile": { ... },              // optional participant profile
      "steps": [
        {"action": "produce_suite"},
        {"action": "explain", "test_index": 0},
        {"action": "delete_test", "test_index": 2},
        {"action": "edit_test", "test_index": 0, "body": "def test_x(): ..."},
        {"action": "regenerate_test", "test_index": 1, "guidance": "..."},
        {"action": "regenerate_suite", "guidance": "..."},
        {"action": "ask_function"},
        {"action": "request_advice"},
        {"action": "regenerate_function", "use_advice": true},
        {"action": "view_function"},
        {"action": "advance_clock", "seconds": 120.5},
        {"action": "tick"},
        {"action": "close"}
      ]
    }

Steps run against a virtual clock, so two runs of the same script against
the replay backend produce byte-identical logs and metrics. A step whose
action is impossible in the current phase fails with the step index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .bundle import export_from_engine
from .clock import VirtualClock
from .engine import CurationAction, Session, SessionEngine
from .errors import ScriptStepError, SpecfirstError
from .specmodel import ProblemSpec
from .taskbank import Assignment, TaskPools, assign_tasks, spec_for_task
from .telemetry import ArtifactStore, ParticipantProfile

SCRIPT_ACTIONS = (
    "produce_suite",
    "explain",
    "regenerate_test",
    "delete_test",
    "edit_test",
    "regenerate_suite",
    "ask_function",
    "regenerate_function",
    "request_advice",
    "view_function",
    "advance_clock",
    "tick",
    "close",
)


@dataclass(frozen=True)
class ScriptOutcome:
    session: Session
    bundle_dir: Path


def load_script(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _resolve_target(session: Session, step: dict, index: int) -> str:
    if session.suite is None:
        raise ScriptStepError(index, "no suite exists yet")
    if "test_id" in step:
        return step["test_id"]
    if "test_name" in step:
        for test in session.suite.tests:
            if test.name == step["test_name"]:
                return test.test_id
        raise ScriptStepError(index, f"no test named {step['test_name']!r}")
    if "test_index" in step:
        position = int(step["test_index"])
        if not 0 <= position < len(session.suite.tests):
            raise ScriptStepError(index, f"test_index {position} out of range")
        return session.suite.tests[position].test_id
    raise ScriptStepError(index, "per-test step needs test_id, test_name, or test_index")


def run_script(
    engine: SessionEngine,
    clock: VirtualClock,
    script: dict,
    *,
    session: Session,
    export_dir: str | Path,
    store: ArtifactStore | None = None,
) -> ScriptOutcome:
    """Execute the scripted steps against an existing session and export."""
    store = store or engine.store
    step_seconds = float(script.get("step_seconds", 1.0))

    for index, step in enumerate(script.get("steps", [])):
        action = step.get("action")
        if action not in SCRIPT_ACTIONS:
            raise ScriptStepError(index, f"unknown action {action!r}")
        if action == "advance_clock":
            clock.advance(float(step.get("seconds", 0.0)))
            continue
        if action != "tick":
            clock.advance(float(step.get("advance", step_seconds)))
        try:
            if action == "produce_suite":
                engine.produce_suite(session, guidance=step.get("guidance", ""))
            elif action in ("explain", "regenerate_test", "delete_test", "edit_test"):
                target = _resolve_target(session, step, index)
                kind = "explain" if action == "explain" else action
                guidance = step.get("body") if action == "edit_test" else step.get("guidance")
                engine.curate(session, CurationAction(kind=kind, target_test_id=target, guidance=guidance))
            elif action == "regenerate_suite":
                engine.curate(session, CurationAction(kind="regenerate_suite", guidance=step.get("guidance")))
            elif action == "ask_function":
                engine.ask_function(session)
            elif action == "regenerate_function":
                engine.regenerate_function(session, use_advice=bool(step.get("use_advice", False)))
            elif action == "request_advice":
                engine.request_advice(session)
            elif action == "view_function":
                engine.record_view(session)
            elif action == "tick":
                engine.tick_budget(session, clock.now())
            elif action == "close":
                engine.close_session(session)
        except ScriptStepError:
            raise
        except SpecfirstError as exc:
            if bool(step.get("allow_failure", False)):
                continue
            raise ScriptStepError(index, f"{type(exc).__name__}: {exc}") from exc

    if not session.terminal:
        engine.close_session(session)
    bundle_dir = export_from_engine(session, store, export_dir)
    return ScriptOutcome(session=session, bundle_dir=bundle_dir)


def session_from_script(
    engine: SessionEngine,
    script: dict,
    *,
    spec: ProblemSpec,
    task_id: str,
    session_id: str,
    budget_seconds: float,
    debounce_seconds: float | None = None,
) -> Session:
    profile = ParticipantProfile.from_dict(script["profile"]) if script.get("profile") else None
    return engine.create_session(
        session_id=session_id,
        participant_id=script.get("participant_id", "p-000"),
        task_id=task_id,
        spec=spec,
        budget_seconds=float(script.get("budget_seconds", budget_seconds)),
        debounce_seconds=debounce_seconds,
        profile=profile,
    )


def headless_run(
    engine: SessionEngine,
    clock: VirtualClock,
    script: dict,
    *,
    pools: TaskPools,
    history: list[Assignment],
    assignment_seed: int,
    export_dir: str | Path,
    budget_seconds: float,
    debounce_seconds: float | None = None,
    session_id: str | None = None,
) -> ScriptOutcome:
    """Assign (or pin) a task, run the script, and export the bundle. Deterministic."""
    participant = script.get("participant_id", "p-000")
    assignment: Assignment | None = None
    if script.get("task_id"):
        task_id = script["task_id"]
        task = next((t for t in (*pools.warmup, *pools.evaluation) if t.task_id == task_id), None)
        if task is None:
            raise ScriptStepError(-1, f"pinned task_id {task_id!r} is not in the configured pools")
    else:
        assignment = assign_tasks(pools, participant, history, assignment_seed, assigned_at=clock.now())
        history.append(assignment)
        warmup = script.get("task") == "warmup"
        task_id = assignment.warmup_task if warmup else assignment.evaluation_task
        pool = pools.warmup if warmup else pools.evaluation
        task = next(t for t in pool if t.task_id == task_id)
    spec = spec_for_task(task)

    session = session_from_script(
        engine,
        script,
        spec=spec,
        task_id=task_id,
        session_id=session_id or f"session-{participant}",
        budget_seconds=budget_seconds,
        debounce_seconds=debounce_seconds,
    )
    session.assignment = assignment
    return run_script(engine, clock, script, session=session, export_dir=export_dir)
