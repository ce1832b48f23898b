"""Per-session export bundle: events, metrics, profile, and artifact snapshots.

Bundle layout:

    <export_dir>/<session_id>/
      events.jsonl   one accepted event per line, seq order
      session.json   session summary + assignment + config hashes
      metrics.csv    one row, the dependent-variable columns
      profile.json   pseudonymized participant record
      artifacts/     hash-named text files (SHA-256 of content = file name)

Re-exporting a session is byte-identical except the exported_at field in
session.json. ``verify_bundle`` checks the hash closure: every payload_hash
in the log resolves to an artifact whose recomputed hash matches its name.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path
from typing import Sequence

from .engine import Session
from .errors import NonTerminalExportError
from .harness import ExecutionReport, PerTestResult
from .metrics import (
    METRICS_CSV_COLUMNS,
    SessionMetrics,
    compute_session_metrics,
    last_suite_payload_hash,
    metrics_csv_text,
)
from .hashing import sha256_text
from .telemetry import (
    EMAIL_PATTERN,
    ArtifactStore,
    ParticipantProfile,
    SessionEvent,
    read_events_jsonl,
    scan_text_for_identifiers,
)


def session_summary(session: Session, exported_at: str | None = None) -> dict:
    summary = {
        "session_id": session.session_id,
        "participant_id": session.participant_id,
        "task_id": session.task_id,
        "phase": session.phase,
        "outcome": session.outcome,
        "started_at": session.started_at,
        "budget_seconds": session.budget_seconds,
        "first_suite_at": session.first_suite_at,
        "first_all_pass_at": session.first_all_pass_at,
        "suite_version": session.suite.suite_version if session.suite else 0,
        "function_version": session.function.function_version if session.function else 0,
        "spec_hash": session.spec.source_hash,
        "spec_function_name": session.spec.function_name,
        "debounce": {
            "window_seconds": session.log.debounce_seconds,
            "dropped_events": session.log.dropped_count,
        },
        "rejected_operations": session.rejections,
        "assignment": (
            {
                "participant_id": session.assignment.participant_id,
                "warmup_task": session.assignment.warmup_task,
                "evaluation_task": session.assignment.evaluation_task,
                "assigned_at": session.assignment.assigned_at,
                "seed": session.assignment.seed,
            }
            if session.assignment
            else None
        ),
        "config": session.config_info,
    }
    if exported_at is not None:
        summary["exported_at"] = exported_at
    return summary


def export_bundle(
    session: Session,
    store: ArtifactStore,
    export_dir: str | Path,
    *,
    reports: Sequence[ExecutionReport],
) -> Path:
    """Write the session's bundle directory; requires a terminal session."""
    if not session.terminal:
        raise NonTerminalExportError(f"session {session.session_id} is {session.phase}, not terminal")

    bundle = Path(export_dir) / session.session_id
    bundle.mkdir(parents=True, exist_ok=True)
    artifacts_dir = bundle / "artifacts"
    artifacts_dir.mkdir(exist_ok=True)

    events = session.log.events
    (bundle / "events.jsonl").write_text(session.log.to_jsonl(), encoding="utf-8")

    hashes = sorted({e.payload_hash for e in events if e.payload_hash})
    for digest in hashes:
        (artifacts_dir / digest).write_text(store.read(digest), encoding="utf-8")

    metrics = compute_session_metrics(
        events,
        list(reports),
        session.budget_seconds,
        final_suite=session.suite,
    )
    (bundle / "metrics.csv").write_text(
        metrics_csv_text(session.session_id, session.task_id, metrics), encoding="utf-8"
    )

    exported_at = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    summary = session_summary(session, exported_at=exported_at)
    summary["metrics_flags"] = {
        "budget_capped": metrics.budget_capped,
        "interrupted_outlier": metrics.interrupted_outlier,
        "warnings": list(metrics.warnings),
    }
    (bundle / "session.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    profile = session.profile or ParticipantProfile(participant_id=session.participant_id)
    (bundle / "profile.json").write_text(json.dumps(profile.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return bundle


# --- reading bundles back --------------------------------------------------

def load_events(bundle_dir: str | Path) -> list[SessionEvent]:
    return read_events_jsonl((Path(bundle_dir) / "events.jsonl").read_text(encoding="utf-8"))


def load_session_summary(bundle_dir: str | Path) -> dict:
    return json.loads((Path(bundle_dir) / "session.json").read_text(encoding="utf-8"))


def read_artifact(bundle_dir: str | Path, digest: str) -> str:
    return (Path(bundle_dir) / "artifacts" / digest).read_text(encoding="utf-8")


def load_reports(bundle_dir: str | Path, events: Sequence[SessionEvent]) -> list[ExecutionReport]:
    """Rebuild ExecutionReports from the run_tests artifact snapshots."""
    reports = []
    for event in events:
        if event.action != "run_tests" or not event.payload_hash:
            continue
        obj = json.loads(read_artifact(bundle_dir, event.payload_hash))
        per_test = tuple(
            PerTestResult(test_id=t["test_id"], outcome=t["outcome"], failure_message=t.get("message"))
            for t in obj["tests"]
        )
        reports.append(
            ExecutionReport(
                per_test=per_test,
                pass_count=obj["pass_count"],
                total_count=obj["total_count"],
                coverage=obj.get("coverage"),
                wall_time_seconds=0.0,
                suite_version=obj["suite_version"],
                function_version=obj["function_version"],
            )
        )
    return reports


def recompute_bundle_metrics(bundle_dir: str | Path) -> tuple[SessionMetrics, str]:
    """Recompute the metrics row from an exported bundle. Returns (metrics, csv)."""
    bundle_dir = Path(bundle_dir)
    events = load_events(bundle_dir)
    reports = load_reports(bundle_dir, events)
    summary = load_session_summary(bundle_dir)

    def load_suite_source() -> str | None:
        digest = last_suite_payload_hash(events)
        if digest is None:
            return None
        return read_artifact(bundle_dir, digest)

    metrics = compute_session_metrics(
        events,
        reports,
        float(summary["budget_seconds"]),
        suite_source_loader=load_suite_source,
    )
    csv_text = metrics_csv_text(summary["session_id"], summary["task_id"], metrics)
    return metrics, csv_text


def parse_metrics_csv(text: str) -> list[dict[str, float | None]]:
    """Parse metrics.csv rows into numeric dicts (empty cells become None)."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        return []
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        row: dict = {}
        for name, cell in zip(header, cells):
            if name in ("session_id", "task_id"):
                row[name] = cell
            elif cell == "":
                row[name] = None
            else:
                row[name] = float(cell)
        rows.append(row)
    return rows


# --- verification -----------------------------------------------------------

def verify_bundle(bundle_dir: str | Path, *, identifier_patterns: Sequence[str] = (EMAIL_PATTERN,)) -> list[str]:
    """Integrity check; returns a list of problems (empty means the bundle is sound)."""
    bundle_dir = Path(bundle_dir)
    problems: list[str] = []

    events_path = bundle_dir / "events.jsonl"
    if not events_path.exists():
        return [f"missing events.jsonl in {bundle_dir}"]
    try:
        events = load_events(bundle_dir)
    except (json.JSONDecodeError, KeyError) as exc:
        return [f"unparseable events.jsonl: {exc}"]

    for index, event in enumerate(events):
        if event.seq != index + 1:
            problems.append(f"event seq not gapless at position {index}: got {event.seq}")
            break

    artifacts_dir = bundle_dir / "artifacts"
    for event in events:
        if event.payload_hash and not (artifacts_dir / event.payload_hash).exists():
            problems.append(f"event seq {event.seq} references missing artifact {event.payload_hash}")

    if artifacts_dir.exists():
        for path in sorted(artifacts_dir.iterdir()):
            digest = sha256_text(path.read_text(encoding="utf-8"))
            if digest != path.name:
                problems.append(f"artifact {path.name} content hashes to {digest}")

    metrics_path = bundle_dir / "metrics.csv"
    if not metrics_path.exists():
        problems.append("missing metrics.csv")
    else:
        header = metrics_path.read_text(encoding="utf-8").splitlines()[0]
        if header != ",".join(METRICS_CSV_COLUMNS):
            problems.append(f"metrics.csv header mismatch: {header}")

    for name in ("session.json", "profile.json"):
        if not (bundle_dir / name).exists():
            problems.append(f"missing {name}")

    problems.extend(scan_bundle_for_identifiers(bundle_dir, identifier_patterns))
    return problems


def scan_bundle_for_identifiers(bundle_dir: str | Path, patterns: Sequence[str]) -> list[str]:
    """Pseudonymity scan: identifier patterns may appear only in post-task free text."""
    bundle_dir = Path(bundle_dir)
    findings: list[str] = []
    for path in sorted(bundle_dir.rglob("*")):
        if not path.is_file():
            continue
        text = path.read_text(encoding="utf-8", errors="replace")
        if path.name == "profile.json":
            # free_text is consented prose, reviewed manually; mask it out.
            try:
                obj = json.loads(text)
                if isinstance(obj.get("post_task"), dict):
                    obj["post_task"]["free_text"] = ""
                text = json.dumps(obj)
            except json.JSONDecodeError:
                pass
        hits = scan_text_for_identifiers(text, list(patterns))
        for hit in hits:
            findings.append(f"identifier-like string {hit!r} in {path.relative_to(bundle_dir)}")
    return findings


def export_from_engine(session: Session, store: ArtifactStore, export_dir: str | Path) -> Path:
    """Export using the reports reconstructible from the session's own log."""
    reports: list[ExecutionReport] = []
    if session.last_report is not None:
        # The log's run_tests snapshots are authoritative; rebuild from them
        # so exported metrics never depend on in-memory state.
        for event in session.log.events:
            if event.action != "run_tests" or not event.payload_hash:
                continue
            obj = json.loads(store.read(event.payload_hash))
            per_test = tuple(
                PerTestResult(test_id=t["test_id"], outcome=t["outcome"], failure_message=t.get("message"))
                for t in obj["tests"]
            )
            reports.append(
                ExecutionReport(
                    per_test=per_test,
                    pass_count=obj["pass_count"],
                    total_count=obj["total_count"],
                    coverage=obj.get("coverage"),
                    wall_time_seconds=0.0,
                    suite_version=obj["suite_version"],
                    function_version=obj["function_version"],
                )
            )
    return export_bundle(session, store, export_dir, reports=reports)
