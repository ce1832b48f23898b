from __future__ import annotations

import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one PASS/FAIL line per acceptance criterion as it finishes."""
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or not item.nodeid.startswith("tests/test_acceptance.py"):
        return
    reporter = item.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        verdict = "PASS" if report.passed else "FAIL"
        reporter.write_line(f"ACCEPTANCE {item.name}: {verdict}")

from specfirst.clock import VirtualClock
from specfirst.demo import build_demo_workspace
from specfirst.engine import SessionEngine
from specfirst.gateway import Gateway, GenerationParams, PromptLibrary, QueueBackend
from specfirst.harness import ExecutionReport, PerTestResult
from specfirst.specmodel import parse_spec
from specfirst.telemetry import ArtifactStore

TEST_PARAMS = GenerationParams(model_id="test-model", temperature=0.0, seed=11, max_tokens=1024)

TWO_SUM_SPEC = """function_name = "two_sum"
signature = "two_sum(nums, target)"
description = \"\"\"
Given a list of integers and a target, return the indices of the two
distinct elements that add up to the target, as a tuple (i, j) with i < j.
\"\"\"
constraints = [
  "exactly one solution exists",
  "the same element may not be used twice",
]

[[examples]]
input = "[2, 7, 11, 15], 9"
expected = "(0, 1)"
"""


def suite_reply(names_and_bodies: list[tuple[str, str]]) -> str:
    """Wrap test functions in the fenced-block reply shape the gateway expects."""
    chunks = "\n\n".join(body for _, body in names_and_bodies)
    return f"Generated tests:\n\n```python\n{chunks}\n```\n"


def simple_suite_reply(n: int, fn: str = "two_sum", salt: str = "") -> str:
    tests = []
    for i in range(n):
        body = f"def test_case_{i}():\n    assert {fn}([{i}, {i + 1}], {2 * i + 1}) == (0, 1){salt}\n"
        tests.append((f"test_case_{i}", body))
    return suite_reply(tests)


def function_reply(source: str) -> str:
    return f"Implementation:\n\n```python\n{source}```\n"


class MemoryStore:
    """Dict-backed stand-in for ArtifactStore; used by high-volume tests."""

    def __init__(self):
        self.data: dict[str, str] = {}

    def snapshot(self, artifact_text: str, kind: str) -> str:
        from specfirst.hashing import sha256_text

        digest = sha256_text(artifact_text)
        self.data[digest] = artifact_text
        return digest

    def read(self, digest: str) -> str:
        return self.data[digest]

    def exists(self, digest: str) -> bool:
        return digest in self.data


class PlannedExecutor:
    """Stub harness: consumes a plan of per-run failure counts.

    Plan items are integers (how many tests fail on that run); when the plan
    runs out the last item repeats. Avoids spawning subprocesses in tests
    that only exercise workflow logic.
    """

    def __init__(self, plan: list[int]):
        self.plan = list(plan)
        self.calls = 0

    def __call__(self, suite, function) -> ExecutionReport:
        failures = self.plan[min(self.calls, len(self.plan) - 1)]
        self.calls += 1
        per_test = []
        for index, test in enumerate(suite.tests):
            failed = index < failures
            per_test.append(
                PerTestResult(
                    test_id=test.test_id,
                    outcome="fail" if failed else "pass",
                    failure_message="AssertionError: planned failure" if failed else None,
                )
            )
        return ExecutionReport(
            per_test=tuple(per_test),
            pass_count=len(per_test) - min(failures, len(per_test)),
            total_count=len(per_test),
            coverage=0.9,
            wall_time_seconds=0.01,
            suite_version=suite.suite_version,
            function_version=function.function_version,
        )


def make_engine(
    tmp_path,
    replies: list[str],
    *,
    executor=None,
    clock: VirtualClock | None = None,
    params: GenerationParams = TEST_PARAMS,
    store=None,
):
    clock = clock or VirtualClock()
    gateway = Gateway(QueueBackend(list(replies)))
    store = store if store is not None else ArtifactStore(tmp_path / "artifacts")
    engine = SessionEngine(
        gateway=gateway,
        prompts=PromptLibrary(),
        params=params,
        clock=clock,
        store=store,
        executor=executor,
    )
    return engine, clock


def make_session(engine, *, session_id="s-1", participant="p-1", task="task-1", budget=2400.0, spec_text=TWO_SUM_SPEC):
    return engine.create_session(
        session_id=session_id,
        participant_id=participant,
        task_id=task,
        spec=parse_spec(spec_text),
        budget_seconds=budget,
    )


@pytest.fixture(scope="session")
def demo_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo")
    build_demo_workspace(root)
    return root


@pytest.fixture()
def two_sum_spec():
    return parse_spec(TWO_SUM_SPEC)
