from __future__ import annotations

import pytest

from specfirst.errors import ClosedLogError, ConfigurationError
from specfirst.telemetry import (
    ArtifactStore,
    EventLog,
    ParticipantProfile,
    SessionEvent,
    TokenUsage,
    read_events_jsonl,
)


def event(t: float, action: str = "delete_test", target: str | None = "tid-1", actor: str = "user"):
    return SessionEvent(seq=0, t=t, session_id="s", actor=actor, action=action, target=target)


def fresh_log() -> EventLog:
    return EventLog("s")


# --- debounce ---------------------------------------------------------------

def test_duplicate_click_within_window_is_dropped():
    log = fresh_log()
    assert log.record(event(10.0)) is True
    assert log.record(event(10.1)) is False
    assert len(log.events) == 1
    assert log.dropped_count == 1


def test_duplicate_click_outside_window_is_kept():
    log = fresh_log()
    assert log.record(event(10.0)) is True
    assert log.record(event(10.5)) is True
    assert len(log.events) == 2


def test_different_targets_are_not_debounced():
    log = fresh_log()
    assert log.record(event(10.0, target="tid-1")) is True
    assert log.record(event(10.1, target="tid-2")) is True
    assert len(log.events) == 2


def test_different_actions_are_not_debounced():
    log = fresh_log()
    assert log.record(event(10.0, action="explain_test")) is True
    assert log.record(event(10.1, action="delete_test")) is True


def test_system_events_never_debounce():
    log = fresh_log()
    assert log.record(event(10.0, action="run_tests", target=None, actor="system")) is True
    assert log.record(event(10.0, action="run_tests", target=None, actor="system")) is True


def test_intervening_system_event_does_not_reset_user_debounce():
    log = fresh_log()
    assert log.record(event(10.0)) is True
    assert log.record(event(10.05, action="run_tests", target=None, actor="system")) is True
    assert log.record(event(10.1)) is False


def test_debounce_boundary_is_inclusive():
    log = fresh_log()
    assert log.record(event(0.0)) is True
    assert log.record(event(0.3)) is False
    assert log.record(event(0.62)) is True


# --- sequence discipline ------------------------------------------------------

def test_seq_is_gapless_and_excludes_dropped_events():
    log = fresh_log()
    log.record(event(1.0))
    log.record(event(1.1))  # dropped
    log.record(event(2.0))
    log.record(event(3.0, action="explain_test"))
    assert [e.seq for e in log.events] == [1, 2, 3]


def test_closed_log_rejects_records():
    log = fresh_log()
    log.record(event(1.0))
    log.close()
    with pytest.raises(ClosedLogError):
        log.record(event(2.0))


def test_wrong_session_id_rejected():
    log = fresh_log()
    with pytest.raises(ConfigurationError):
        log.record(SessionEvent(seq=0, t=1.0, session_id="other", actor="user", action="produce_suite"))


def test_unknown_action_rejected():
    with pytest.raises(ConfigurationError):
        SessionEvent(seq=0, t=1.0, session_id="s", actor="user", action="not_an_action")


def test_jsonl_round_trip():
    log = fresh_log()
    log.record(event(1.5, action="produce_suite", target=None))
    log.record(
        SessionEvent(
            seq=0,
            t=2.25,
            session_id="s",
            actor="user",
            action="ask_function",
            target="1",
            payload_hash="a" * 64,
            tokens=TokenUsage(10, 20),
        )
    )
    decoded = read_events_jsonl(log.to_jsonl())
    assert decoded == log.events
    assert decoded[1].tokens.total == 30


def test_durable_mirror_written_live(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog("s", durable_path=path)
    log.record(event(1.0))
    log.record(event(5.0))
    assert len(path.read_text().splitlines()) == 2


def test_total_tokens_sums_event_usage():
    log = fresh_log()
    log.record(
        SessionEvent(seq=0, t=1.0, session_id="s", actor="user", action="produce_suite", tokens=TokenUsage(5, 7))
    )
    log.record(event(2.0))
    assert log.total_tokens() == 12


# --- artifact store -----------------------------------------------------------

def test_snapshot_is_content_addressed_and_idempotent(tmp_path):
    store = ArtifactStore(tmp_path)
    first = store.snapshot("suite text", "suite")
    second = store.snapshot("suite text", "suite")
    assert first == second
    assert len(list(tmp_path.iterdir())) == 1
    assert store.read(first) == "suite text"


def test_snapshot_empty_text_uses_known_sha256(tmp_path):
    # SHA-256("") test vector.
    store = ArtifactStore(tmp_path)
    digest = store.snapshot("", "suite")
    assert digest == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_snapshot_matches_published_vector(tmp_path):
    # SHA-256("abc") from the FIPS 180-2 appendix.
    store = ArtifactStore(tmp_path)
    assert store.snapshot("abc", "function") == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )


def test_unknown_artifact_kind_rejected(tmp_path):
    store = ArtifactStore(tmp_path)
    with pytest.raises(ConfigurationError):
        store.snapshot("x", "mystery")


# --- participant profile --------------------------------------------------------

def test_profile_enum_validation():
    with pytest.raises(ConfigurationError):
        ParticipantProfile(participant_id="p", python_familiarity="expert")
    with pytest.raises(ConfigurationError):
        ParticipantProfile(participant_id="p", prior_llm_codegen_use="sometimes")
    with pytest.raises(ConfigurationError):
        ParticipantProfile(participant_id="p", post_task_likert=(0,))


def test_profile_round_trip():
    profile = ParticipantProfile(
        participant_id="p-7",
        programming_experience_years=9,
        python_familiarity="high",
        prior_tdd_experience="low",
        prior_llm_codegen_use="frequently",
        post_task_likert=(4, 5, 3),
        post_task_free_text="smooth workflow",
    )
    assert ParticipantProfile.from_dict(profile.to_dict()) == profile
