"""Acceptance suite: one test per release criterion, at its stated tolerance.

All tests run headless against the replay backend or stubs; no UI and no
network are involved. Each test prints a PASS/FAIL line via the conftest
hook so the suite doubles as a release checklist.
"""

from __future__ import annotations

import dataclasses
import math
import random
import time

import pytest

from specfirst.bundle import recompute_bundle_metrics, verify_bundle
from specfirst.clock import VirtualClock
from specfirst.config import build_engine, load_config
from specfirst.driver import headless_run, load_script, run_script
from specfirst.engine import CurationAction, SessionEngine, live_session_metrics
from specfirst.errors import SpecfirstError
from specfirst.gateway import BackendReply, Gateway, PromptLibrary
from specfirst.harness import (
    DEFAULT_PROFILE,
    ExecutionLimits,
    FunctionArtifact,
    TestCase,
    TestSuite,
    execute,
)
from specfirst.metrics import (
    descriptive_stats,
    spearman_rho,
    tokenize_test_body,
)
from specfirst.metrics import test_diversity as suite_diversity
from specfirst.taskbank import Assignment, TaskPools, TaskRecord, assign_tasks, build_pools, ingest_bank
from specfirst.specmodel import parse_spec

from conftest import (
    MemoryStore,
    PlannedExecutor,
    TEST_PARAMS,
    function_reply,
    make_engine,
    make_session,
    simple_suite_reply,
    suite_reply,
)

from test_metrics import (
    brute_force_diversity,
    brute_force_median,
    brute_force_quantile,
    brute_force_spearman,
)

FN_REPLY = function_reply("def two_sum(nums, target):\n    return (0, 1)\n")


def _demo(demo_root, tmp_path, name):
    config = load_config(demo_root / "config.toml")
    config = dataclasses.replace(
        config,
        data_dir=str(tmp_path / name / "data"),
        export_dir=str(tmp_path / name / "bundles"),
    )
    clock = VirtualClock()
    engine = build_engine(config, clock=clock)
    pools = build_pools(ingest_bank([config.resolve(p) for p in config.bank.paths]))
    return config, engine, clock, pools


def _run_demo_script(demo_root, tmp_path, script_name, run_name, session_id):
    config, engine, clock, pools = _demo(demo_root, tmp_path, run_name)
    script = load_script(demo_root / "scripts" / f"{script_name}.json")
    return headless_run(
        engine,
        clock,
        script,
        pools=pools,
        history=[],
        assignment_seed=config.bank.assignment_seed,
        export_dir=config.resolve(config.export_dir),
        budget_seconds=config.session.budget_seconds,
        debounce_seconds=config.session.debounce_seconds,
        session_id=session_id,
    )


# 1. Replay determinism ------------------------------------------------------

def test_replay_determinism_of_canonical_happy_path(demo_root, tmp_path):
    started = time.monotonic()
    first = _run_demo_script(demo_root, tmp_path, "happy_path", "d1", "s-det")
    second = _run_demo_script(demo_root, tmp_path, "happy_path", "d2", "s-det")
    elapsed = time.monotonic() - started

    assert first.session.outcome == "all_pass"
    events_a = (first.bundle_dir / "events.jsonl").read_bytes()
    events_b = (second.bundle_dir / "events.jsonl").read_bytes()
    assert events_a == events_b, "events.jsonl must be byte-identical across replays"
    metrics_a = (first.bundle_dir / "metrics.csv").read_bytes()
    metrics_b = (second.bundle_dir / "metrics.csv").read_bytes()
    assert metrics_a == metrics_b, "metrics.csv rows must be identical across replays"
    assert elapsed < 10.0, f"happy path replays took {elapsed:.1f}s, budget is 10s"


# 2. Metric capping ------------------------------------------------------------

def test_never_passing_session_caps_time_to_budget(demo_root, tmp_path):
    outcome = _run_demo_script(demo_root, tmp_path, "never_pass", "cap", "s-cap")
    metrics, csv_text = recompute_bundle_metrics(outcome.bundle_dir)
    assert metrics.pass_all == 0
    assert metrics.time_to_pass == 2400.0
    row = csv_text.splitlines()[1].split(",")
    assert row[2] == "0"
    assert row[6] == "2400.000"


# 3. Counter oracle over ten scripted sessions ---------------------------------

def _counter_scenarios():
    """Ten scripted sessions with hand-counted expected process metrics.

    Replies are queued per generation call in step order; plans drive the
    stub executor (failures per run). Expected values were counted from the
    step lists by hand: edits = explain+regenerate_test+delete+edit steps,
    regens = suite productions beyond the first, advice = advice steps,
    iterations = function generations up to and including the first all-pass
    run (all of them when no run passes).
    """
    suite5 = simple_suite_reply(5)
    suite5b = simple_suite_reply(5, salt="  # alt")
    regen_reply = suite_reply(
        [("test_case_r", "def test_case_r():\n    assert two_sum([8, 1], 9) == (0, 1)\n")]
    )
    edit_body = "def test_edited():\n    assert two_sum([6, 3], 9) == (0, 1)\n"

    return [
        # (name, steps, replies, plan, expected)
        (
            "s01",
            [{"action": "produce_suite"}, {"action": "ask_function"}],
            [suite5, FN_REPLY],
            [0],
            dict(edits=0, regens=0, advice=0, iterations=1, pass_all=1),
        ),
        (
            "s02",
            [
                {"action": "produce_suite"},
                {"action": "explain", "test_index": 0},
                {"action": "delete_test", "test_index": 1},
                {"action": "ask_function"},
            ],
            [suite5, "prose", FN_REPLY],
            [0],
            dict(edits=2, regens=0, advice=0, iterations=1, pass_all=1),
        ),
        (
            "s03",
            [
                {"action": "produce_suite"},
                {"action": "ask_function"},
                {"action": "request_advice"},
                {"action": "regenerate_function", "use_advice": True},
            ],
            [suite5, FN_REPLY, "advice", FN_REPLY],
            [2, 0],
            dict(edits=0, regens=0, advice=1, iterations=2, pass_all=1),
        ),
        (
            "s04",
            [{"action": "produce_suite"}, {"action": "produce_suite"}, {"action": "ask_function"}],
            [suite5, suite5b, FN_REPLY],
            [0],
            dict(edits=0, regens=1, advice=0, iterations=1, pass_all=1),
        ),
        (
            "s05",
            [
                {"action": "produce_suite"},
                {"action": "regenerate_suite", "guidance": "sharper"},
                {"action": "explain", "test_index": 0},
                {"action": "ask_function"},
                {"action": "request_advice"},
                {"action": "request_advice"},
                {"action": "regenerate_function"},
                {"action": "regenerate_function"},
            ],
            [suite5, suite5b, "prose", FN_REPLY, "advice 1", "advice 2", FN_REPLY, FN_REPLY],
            [1, 1, 0],
            dict(edits=1, regens=1, advice=2, iterations=3, pass_all=1),
        ),
        (
            "s06",
            [
                {"action": "produce_suite"},
                {"action": "delete_test", "test_index": 0},
                {"action": "delete_test", "test_index": 0},
                {"action": "ask_function"},
                {"action": "request_advice"},
                {"action": "close"},
            ],
            [suite5, FN_REPLY, "advice"],
            [1],
            dict(edits=2, regens=0, advice=1, iterations=1, pass_all=0),
        ),
        (
            "s07",
            [
                {"action": "produce_suite"},
                {"action": "edit_test", "test_index": 0, "body": edit_body},
                {"action": "regenerate_test", "test_index": 1},
                {"action": "ask_function"},
            ],
            [suite5, regen_reply, FN_REPLY],
            [0],
            dict(edits=2, regens=0, advice=0, iterations=1, pass_all=1),
        ),
        (
            "s08",
            [
                {"action": "produce_suite"},
                {"action": "explain", "test_index": 0},
                {"action": "explain", "test_index": 0},
                {"action": "regenerate_suite"},
                {"action": "ask_function"},
                {"action": "close"},
            ],
            [suite5, "prose 1", "prose 2", suite5b, FN_REPLY],
            [3],
            dict(edits=2, regens=1, advice=0, iterations=1, pass_all=0),
        ),
        (
            "s09",
            [
                {"action": "produce_suite"},
                {"action": "ask_function"},
                {"action": "regenerate_function"},
                {"action": "regenerate_function"},
                {"action": "close"},
            ],
            [suite5, FN_REPLY, FN_REPLY, FN_REPLY],
            [1],
            dict(edits=0, regens=0, advice=0, iterations=3, pass_all=0),
        ),
        (
            "s10",
            [
                {"action": "produce_suite"},
                {"action": "explain", "test_index": 0},
                {"action": "delete_test", "test_index": 2},
                {"action": "edit_test", "test_index": 0, "body": edit_body},
                {"action": "regenerate_test", "test_index": 1},
                {"action": "regenerate_suite"},
                {"action": "ask_function"},
                {"action": "request_advice"},
                {"action": "regenerate_function", "use_advice": True},
            ],
            [suite5, "prose", regen_reply, suite5b, FN_REPLY, "advice", FN_REPLY],
            [2, 0],
            dict(edits=4, regens=1, advice=1, iterations=2, pass_all=1),
        ),
    ]


def test_counter_oracle_on_ten_scripted_sessions(tmp_path):
    for name, steps, replies, plan, expected in _counter_scenarios():
        engine, clock = make_engine(tmp_path / name, replies, executor=PlannedExecutor(plan))
        session = make_session(engine, session_id=f"sess-{name}")
        script = {"steps": steps, "step_seconds": 1.0}
        outcome = run_script(engine, clock, script, session=session, export_dir=tmp_path / name / "bundles")
        metrics, _ = recompute_bundle_metrics(outcome.bundle_dir)
        label = f"scenario {name}"
        assert metrics.test_edits == expected["edits"], label
        assert metrics.suite_regenerations == expected["regens"], label
        assert metrics.advice_triggers == expected["advice"], label
        assert metrics.iterations_to_pass == expected["iterations"], label
        assert metrics.pass_all == expected["pass_all"], label
        # The live in-memory counters must agree with the exported log.
        live = live_session_metrics(session)
        assert live.test_edits == metrics.test_edits, label
        assert live.suite_regenerations == metrics.suite_regenerations, label
        assert live.advice_triggers == metrics.advice_triggers, label
        assert live.iterations_to_pass == metrics.iterations_to_pass, label
        assert live.total_tokens == metrics.total_tokens, label


# 4. PassRate / PassAll fixtures -------------------------------------------------

def test_pass_rate_fixtures(demo_root, tmp_path):
    partial = _run_demo_script(demo_root, tmp_path, "partial_fail", "pr1", "s-pr")
    metrics, csv_text = recompute_bundle_metrics(partial.bundle_dir)
    assert metrics.pass_rate == pytest.approx(0.7, abs=0)
    assert metrics.pass_all == 0
    assert csv_text.splitlines()[1].split(",")[3] == "0.700"

    happy = _run_demo_script(demo_root, tmp_path, "happy_path", "pr2", "s-hp")
    metrics, csv_text = recompute_bundle_metrics(happy.bundle_dir)
    assert metrics.pass_rate == 1.0
    assert metrics.pass_all == 1


# 5. Diversity oracle --------------------------------------------------------------

def test_diversity_matches_brute_force_on_randomized_suites():
    rng = random.Random(20250810)
    vocabulary = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "x1", "y2"]
    for trial in range(20):
        n_tests = rng.randint(2, 6)
        bodies = []
        for index in range(n_tests):
            tokens = rng.sample(vocabulary, rng.randint(1, 6))
            call = ", ".join(tokens)
            bodies.append(f"def test_t{trial}_{index}():\n    assert check({call}) == {rng.randint(0, 9)}\n")
        suite = TestSuite(
            suite_version=1,
            tests=tuple(TestCase.from_body(f"test_t{trial}_{i}", b) for i, b in enumerate(bodies)),
        )
        expected = brute_force_diversity([tokenize_test_body(b) for b in bodies])
        assert abs(suite_diversity(suite) - expected) <= 1e-12, f"trial {trial}"


# 6. Statistics oracles -------------------------------------------------------------

def test_statistics_match_brute_force_definitions():
    rng = random.Random(991)
    for trial in range(100):
        values = [rng.uniform(-1000, 1000) for _ in range(rng.randint(1, 40))]
        stats = descriptive_stats(values)
        assert abs(stats.median - brute_force_median(values)) <= 1e-9, f"median trial {trial}"
        expected_iqr = brute_force_quantile(values, 0.75) - brute_force_quantile(values, 0.25)
        assert abs(stats.iqr - expected_iqr) <= 1e-9, f"iqr trial {trial}"

    for trial in range(100):
        n = rng.randint(3, 30)
        x = [rng.randint(-50, 50) for _ in range(n)]
        y = [rng.randint(-50, 50) for _ in range(n)]
        if len(set(x)) == 1:
            x[0] += 1
        if len(set(y)) == 1:
            y[0] += 1
        assert abs(spearman_rho(x, y) - brute_force_spearman(x, y)) <= 1e-9, f"spearman trial {trial}"

    xs = list(range(1, 21))
    assert spearman_rho(xs, [math.exp(v / 3) for v in xs]) == 1.0
    assert spearman_rho(xs, [-v**3 for v in xs]) == -1.0


# 7. State-machine safety ------------------------------------------------------------

class _KindBackend:
    """Replies by request kind; also records whether a function generation
    was ever issued before the first suite generation completed."""

    backend_id = "kind-stub"

    def __init__(self):
        self.suite_generated = False
        self.violations = 0
        self._replies = {
            "suite": simple_suite_reply(2),
            "single_test": suite_reply(
                [("test_case_0", "def test_case_0():\n    assert two_sum([0, 9], 9) == (0, 1)\n")]
            ),
            "explain_test": "explanation",
            "function": FN_REPLY,
            "regenerate_function": FN_REPLY,
            "advice": "advice",
        }

    def generate(self, request):
        if request.kind in ("function", "regenerate_function") and not self.suite_generated:
            self.violations += 1
        reply = BackendReply(self._replies[request.kind], 1, 1)
        if request.kind == "suite":
            self.suite_generated = True
        return reply


def _session_signature(session):
    return (
        session.phase,
        session.outcome,
        session.suite.suite_version if session.suite else 0,
        session.function.function_version if session.function else 0,
        len(session.log.events),
    )


def test_state_machine_safety_exhaustive_depth_six():
    prompts = PromptLibrary()
    store = MemoryStore()
    spec = parse_spec('function_name = "two_sum"\nsignature = "two_sum(nums, target)"\ndescription = "d"\n')

    def act_produce(engine, session):
        engine.produce_suite(session)

    def act_delete(engine, session):
        if session.suite is None or not session.suite.tests:
            raise SpecfirstError("nothing to delete")
        engine.curate(session, CurationAction(kind="delete_test", target_test_id=session.suite.tests[0].test_id))

    def act_ask(engine, session):
        engine.ask_function(session)

    def act_regen(engine, session):
        engine.regenerate_function(session)

    def act_advice(engine, session):
        engine.request_advice(session)

    def act_expire(engine, session):
        engine.clock.advance(10_000.0)
        engine.tick_budget(session)

    actions = [act_produce, act_delete, act_ask, act_regen, act_advice, act_expire]
    depth = 6
    total = 0
    function_before_suite = 0
    terminal_mutations = 0

    for encoded in range(len(actions) ** depth):
        sequence = []
        code = encoded
        for _ in range(depth):
            sequence.append(code % len(actions))
            code //= len(actions)

        clock = VirtualClock()
        backend = _KindBackend()
        engine = SessionEngine(
            gateway=Gateway(backend),
            prompts=prompts,
            params=TEST_PARAMS,
            clock=clock,
            store=store,
            executor=PlannedExecutor([1, 0]),
        )
        session = engine.create_session(
            session_id="s", participant_id="p", task_id="t", spec=spec, budget_seconds=1000.0
        )
        produced_suite = False
        for action_index in sequence:
            clock.advance(1.0)
            was_terminal = session.terminal
            signature = _session_signature(session)
            try:
                actions[action_index](engine, session)
                if actions[action_index] is act_produce:
                    produced_suite = True
                if actions[action_index] in (act_ask, act_regen) and not produced_suite:
                    function_before_suite += 1
            except SpecfirstError:
                pass
            if was_terminal and _session_signature(session) != signature:
                terminal_mutations += 1
        total += 1
        if backend.violations:
            function_before_suite += backend.violations

    assert total == len(actions) ** depth
    assert function_before_suite == 0, "function generation reachable before suite production"
    assert terminal_mutations == 0, "terminal sessions must accept no mutations"


# 8. Hash closure ---------------------------------------------------------------------

def test_hash_closure_for_every_fixture_bundle(demo_root, tmp_path):
    bundles = [
        _run_demo_script(demo_root, tmp_path, name, f"hc-{name}", f"s-hc-{name}").bundle_dir
        for name in ("happy_path", "never_pass", "partial_fail")
    ]
    for bundle_dir in bundles:
        assert verify_bundle(bundle_dir) == [], f"bundle {bundle_dir} failed verification"

    for bundle_dir in bundles:
        for artifact in sorted((bundle_dir / "artifacts").iterdir()):
            original = artifact.read_bytes()
            for position in (0, len(original) // 2, len(original) - 1):
                tampered = bytearray(original)
                tampered[position] ^= 0x01
                artifact.write_bytes(bytes(tampered))
                problems = verify_bundle(bundle_dir)
                assert problems, f"flipping byte {position} of {artifact.name} went undetected"
                artifact.write_bytes(original)
        assert verify_bundle(bundle_dir) == []


# 9. Debounce --------------------------------------------------------------------------

def test_debounce_window_on_user_actions(tmp_path):
    for gap, expected_events in ((0.1, 1), (0.5, 2)):
        engine, clock = make_engine(
            tmp_path / f"gap-{gap}", [simple_suite_reply(2)], executor=PlannedExecutor([1])
        )
        session = make_session(engine)
        clock.advance(1.0)
        engine.produce_suite(session)
        base_events = len(session.log.events)
        clock.advance(1.0)
        engine.record_view(session)
        clock.advance(gap)
        engine.record_view(session)
        views = len(session.log.events) - base_events
        assert views == expected_events, f"gap {gap}s gave {views} accepted events"


# 10. Assignment balance -----------------------------------------------------------------

def _pools():
    import datetime as dt

    def t(tid, diff):
        return TaskRecord(
            task_id=tid,
            title=tid,
            statement="s",
            difficulty=diff,
            release_date=dt.date(2025, 1, 1),
            reference_signature="f(x)",
        )

    return TaskPools(
        warmup=(t("w0", "easy"), t("w1", "easy"), t("w2", "easy")),
        evaluation=(t("A", "medium"), t("B", "medium"), t("C", "medium")),
    )


def test_assignment_balance_over_three_hundred_participants():
    pools = _pools()
    history: list[Assignment] = []
    for step in range(300):
        history.append(assign_tasks(pools, f"p{step}", history, seed=step))
        counts = {tid: 0 for tid in ("A", "B", "C")}
        for a in history:
            counts[a.evaluation_task] += 1
        assert max(counts.values()) - min(counts.values()) <= 1, f"imbalance at step {step}: {counts}"
    final = {tid: sum(1 for a in history if a.evaluation_task == tid) for tid in ("A", "B", "C")}
    for tid, count in final.items():
        assert 99 <= count <= 101, final


# 11. Harness integration -------------------------------------------------------------------

def test_reference_runner_profile_outcomes_and_exact_coverage():
    branchy = "def branchy(x):\n    if x > 0:\n        return x\n    return -x\n"
    suite = TestSuite(
        suite_version=1,
        tests=(
            TestCase.from_body("test_pos", "def test_pos():\n    assert branchy(5) == 5\n"),
            TestCase.from_body("test_neg", "def test_neg():\n    assert branchy(-5) == 5\n"),
            TestCase.from_body("test_zero", "def test_zero():\n    assert branchy(0) == 0\n"),
        ),
    )
    correct = FunctionArtifact.from_source(branchy, version=1, suite_version=1)
    report = execute(suite, correct, DEFAULT_PROFILE, ExecutionLimits())
    assert [r.outcome for r in report.per_test] == ["pass", "pass", "pass"]
    # Hand count: executable lines = {def, if, return x, return -x} = 4; the
    # three tests drive both branches, so all 4 execute: coverage = 4/4.
    assert report.coverage == 1.0

    # Buggy variant drops the negation; hand-expected outcomes per test.
    buggy = FunctionArtifact.from_source("def branchy(x):\n    if x > 0:\n        return x\n    return x\n", version=2, suite_version=1)
    report = execute(suite, buggy, DEFAULT_PROFILE, ExecutionLimits())
    assert [r.outcome for r in report.per_test] == ["pass", "fail", "pass"]

    # Positive-only suite leaves the negative branch dead: coverage = 3/4.
    positive_only = TestSuite(suite_version=2, tests=(suite.tests[0],))
    report = execute(positive_only, correct, DEFAULT_PROFILE, ExecutionLimits())
    assert report.coverage == 3 / 4
