"""Sandboxed test execution: suites, function artifacts, and reports.

A candidate function runs against the current suite in an isolated
temporary workspace via a runner profile (command template + canonical
report). Isolation is subprocess + temp dir + resource limits; that is a
deliberate desk-scale choice, documented as a limitation against hostile
code, not a container.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .errors import ConfigurationError, HarnessError, RunnerEnvironmentError
from .hashing import sha256_text

log = logging.getLogger(__name__)

OUTCOMES = ("pass", "fail", "error", "timeout")
TEST_ORIGINS = ("generated", "regenerated", "user_edited")

# Keywords excluded from test-body token sets by the diversity metric.
PY_BOILERPLATE_TOKENS = frozenset(
    """def return assert if elif else for while in not and or is None True False
    import from as with raise pass try except finally lambda print self""".split()
)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # domain object, not a pytest class

    test_id: str
    name: str
    body: str
    origin: str = "generated"
    created_at: float = 0.0

    @staticmethod
    def from_body(name: str, body: str, *, origin: str = "generated", created_at: float = 0.0) -> "TestCase":
        if origin not in TEST_ORIGINS:
            raise ConfigurationError(f"unknown test origin {origin!r}")
        return TestCase(test_id=sha256_text(body), name=name, body=body, origin=origin, created_at=created_at)


@dataclass(frozen=True)
class TestSuite:
    __test__ = False  # domain object, not a pytest class

    suite_version: int
    tests: tuple[TestCase, ...]
    spec_hash: str = ""

    def __post_init__(self) -> None:
        ids = [t.test_id for t in self.tests]
        if len(ids) != len(set(ids)):
            raise ConfigurationError("duplicate test_id in suite")

    def test_ids(self) -> list[str]:
        return [t.test_id for t in self.tests]

    def find(self, test_id: str) -> TestCase | None:
        for t in self.tests:
            if t.test_id == test_id:
                return t
        return None


@dataclass(frozen=True)
class FunctionArtifact:
    function_version: int
    source: str
    source_hash: str
    generated_from_suite: int

    @staticmethod
    def from_source(source: str, *, version: int, suite_version: int) -> "FunctionArtifact":
        return FunctionArtifact(
            function_version=version,
            source=source,
            source_hash=sha256_text(source),
            generated_from_suite=suite_version,
        )


@dataclass(frozen=True)
class PerTestResult:
    test_id: str
    outcome: str
    failure_message: str | None = None


@dataclass(frozen=True)
class ExecutionReport:
    per_test: tuple[PerTestResult, ...]
    pass_count: int
    total_count: int
    coverage: float | None
    wall_time_seconds: float
    suite_version: int
    function_version: int

    @property
    def all_pass(self) -> bool:
        return self.total_count > 0 and self.pass_count == self.total_count

    def failing(self) -> list[PerTestResult]:
        return [r for r in self.per_test if r.outcome != "pass"]

    def canonical_dict(self, names: dict[str, str] | None = None) -> dict:
        """Canonical report shape for snapshots: deterministic, no wall time."""
        names = names or {}
        return {
            "tests": [
                {
                    "test_id": r.test_id,
                    "name": names.get(r.test_id, ""),
                    "outcome": r.outcome,
                    "message": r.failure_message,
                }
                for r in self.per_test
            ],
            "pass_count": self.pass_count,
            "total_count": self.total_count,
            "coverage": self.coverage,
            "suite_version": self.suite_version,
            "function_version": self.function_version,
        }


@dataclass(frozen=True)
class ExecutionLimits:
    wall_timeout_seconds: float = 30.0
    memory_cap_bytes: int = 512 * 1024 * 1024
    kill_grace_seconds: float = 5.0


@dataclass(frozen=True)
class RunnerProfile:
    """Pairs a runner command template with the canonical report contract.

    Placeholders in command_template: {python}, {runner}, {manifest}.
    The reference profile drives the bundled stdlib unittest driver; a
    custom profile must emit the same canonical report schema.
    """

    name: str = "python-unittest"
    command_template: tuple[str, ...] = ("{python}", "-I", "{runner}", "--manifest", "{manifest}")
    report_path: str = "report.json"
    coverage: bool = True
    test_prefix: str = "test"
    suite_preamble: str = "from solution import *\n"
    boilerplate_tokens: frozenset[str] = PY_BOILERPLATE_TOKENS


DEFAULT_PROFILE = RunnerProfile()


def _runner_driver_source() -> str:
    return (Path(__file__).parent / "pyunit_runner.py").read_text(encoding="utf-8")


def assemble_suite_source(suite: TestSuite, profile: RunnerProfile = DEFAULT_PROFILE) -> tuple[str, list[str]]:
    """Build the runnable suite file; returns (source, per-test file names).

    Duplicate function names are disambiguated with a numeric suffix in the
    file only; test bodies and ids are untouched.
    """
    seen: dict[str, int] = {}
    file_names: list[str] = []
    chunks: list[str] = [profile.suite_preamble]
    for test in suite.tests:
        count = seen.get(test.name, 0) + 1
        seen[test.name] = count
        body = test.body
        name_in_file = test.name
        if count > 1:
            name_in_file = f"{test.name}__{count}"
            body = body.replace(f"def {test.name}", f"def {name_in_file}", 1)
        file_names.append(name_in_file)
        chunks.append(body.rstrip() + "\n")
    return "\n".join(chunks), file_names


def suite_source(suite: TestSuite, profile: RunnerProfile = DEFAULT_PROFILE) -> str:
    return assemble_suite_source(suite, profile)[0]


def _posix_limits(limits: ExecutionLimits):
    import resource

    def apply() -> None:
        resource.setrlimit(resource.RLIMIT_AS, (limits.memory_cap_bytes, limits.memory_cap_bytes))
        cpu = int(limits.wall_timeout_seconds) + 5
        resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu))

    return apply


def _subprocess_env() -> dict[str, str]:
    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "LANG": "C.UTF-8",
        "LC_ALL": "C.UTF-8",
        "PYTHONDONTWRITEBYTECODE": "1",
        "PYTHONHASHSEED": "0",
    }
    return env


def execute(
    suite: TestSuite,
    function: FunctionArtifact,
    profile: RunnerProfile = DEFAULT_PROFILE,
    limits: ExecutionLimits = ExecutionLimits(),
) -> ExecutionReport:
    """Run the suite against the function in a fresh isolated workspace.

    A non-zero runner exit with a parseable report is data (failing tests),
    never an error. The workspace is removed afterwards, pass or fail.
    """
    if not suite.tests:
        raise ConfigurationError("cannot execute an empty suite")

    workspace = Path(tempfile.mkdtemp(prefix="specfirst-run-"))
    started = time.monotonic()
    try:
        (workspace / "solution.py").write_text(function.source, encoding="utf-8")
        source, file_names = assemble_suite_source(suite, profile)
        (workspace / "test_solution.py").write_text(source, encoding="utf-8")
        (workspace / "_test_runner.py").write_text(_runner_driver_source(), encoding="utf-8")
        manifest = {
            "solution": "solution.py",
            "tests_file": "test_solution.py",
            "coverage": profile.coverage,
            "report": profile.report_path,
            "progress": "progress.jsonl",
            "tests": [
                {"name": test.name, "name_in_file": file_name}
                for test, file_name in zip(suite.tests, file_names)
            ],
        }
        (workspace / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")

        substitutions = {
            "python": sys.executable,
            "runner": "_test_runner.py",
            "manifest": "manifest.json",
        }
        command = [part.format(**substitutions) for part in profile.command_template]

        timed_out = False
        stdout = stderr = b""
        try:
            proc = subprocess.run(
                command,
                cwd=workspace,
                env=_subprocess_env(),
                capture_output=True,
                timeout=limits.wall_timeout_seconds,
                preexec_fn=_posix_limits(limits) if os.name == "posix" else None,
            )
            stdout, stderr = proc.stdout, proc.stderr
        except FileNotFoundError as exc:
            raise RunnerEnvironmentError(f"runner command not found: {command[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            timed_out = True
            stdout = exc.stdout or b""
            stderr = exc.stderr or b""

        wall_time = time.monotonic() - started

        if timed_out:
            per_test = _salvage_timeout(workspace, suite)
            return _build_report(per_test, None, wall_time, suite, function)

        report_file = workspace / profile.report_path
        raw_output = (stdout + b"\n" + stderr).decode("utf-8", errors="replace")
        if not report_file.exists():
            raise HarnessError("runner produced no report", raw_output=raw_output)
        try:
            parsed = json.loads(report_file.read_text(encoding="utf-8"))
            entries = parsed["tests"]
            coverage_obj = parsed.get("coverage")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise HarnessError(f"unparseable runner report: {exc}", raw_output=raw_output) from exc
        if not isinstance(entries, list) or len(entries) != len(suite.tests):
            raise HarnessError(
                f"report has {len(entries) if isinstance(entries, list) else '??'} entries "
                f"for a suite of {len(suite.tests)}",
                raw_output=raw_output,
            )
        per_test = []
        for test, entry in zip(suite.tests, entries):
            outcome = entry.get("outcome")
            if outcome not in OUTCOMES:
                raise HarnessError(f"unknown outcome {outcome!r} in report", raw_output=raw_output)
            per_test.append(PerTestResult(test_id=test.test_id, outcome=outcome, failure_message=entry.get("message")))
        coverage = parse_coverage(coverage_obj) if profile.coverage else None
        return _build_report(tuple(per_test), coverage, wall_time, suite, function)
    finally:
        shutil.rmtree(workspace, ignore_errors=True)


def _salvage_timeout(workspace: Path, suite: TestSuite) -> tuple[PerTestResult, ...]:
    """After a wall-timeout kill, keep completed outcomes; the rest timed out."""
    finished: dict[int, dict] = {}
    progress = workspace / "progress.jsonl"
    if progress.exists():
        for line in progress.read_text(encoding="utf-8").splitlines():
            try:
                entry = json.loads(line)
                finished[int(entry["index"])] = entry
            except (json.JSONDecodeError, KeyError, ValueError):
                continue
    per_test = []
    for index, test in enumerate(suite.tests):
        entry = finished.get(index)
        if entry is not None and entry.get("outcome") in OUTCOMES:
            per_test.append(
                PerTestResult(test_id=test.test_id, outcome=entry["outcome"], failure_message=entry.get("message"))
            )
        else:
            per_test.append(PerTestResult(test_id=test.test_id, outcome="timeout", failure_message=None))
    return tuple(per_test)


def _build_report(
    per_test: Sequence[PerTestResult],
    coverage: float | None,
    wall_time: float,
    suite: TestSuite,
    function: FunctionArtifact,
) -> ExecutionReport:
    return ExecutionReport(
        per_test=tuple(per_test),
        pass_count=sum(1 for r in per_test if r.outcome == "pass"),
        total_count=len(per_test),
        coverage=coverage,
        wall_time_seconds=wall_time,
        suite_version=suite.suite_version,
        function_version=function.function_version,
    )


def parse_coverage(coverage_obj: object) -> float | None:
    """executed/executable from the report's coverage object; never raises."""
    if coverage_obj is None:
        return None
    try:
        executable = int(coverage_obj["executable"])  # type: ignore[index]
        executed = int(coverage_obj["executed"])  # type: ignore[index]
    except (KeyError, TypeError, ValueError):
        log.warning("malformed coverage object %r; coverage omitted", coverage_obj)
        return None
    if executable <= 0:
        log.warning("coverage reported zero executable lines; coverage omitted")
        return None
    fraction = executed / executable
    if not 0.0 <= fraction <= 1.0:
        log.warning("coverage fraction %s out of range; coverage omitted", fraction)
        return None
    return fraction


def synthesize_reference_suite(
    function_name: str, cases: Sequence[tuple[str, str]], *, spec_hash: str = ""
) -> TestSuite:
    """Build a suite from held-out (input, expected) pairs for post-hoc validation."""
    tests = []
    for index, (args_text, expected_text) in enumerate(cases):
        body = f"def test_reference_{index}():\n    assert {function_name}({args_text}) == ({expected_text})\n"
        tests.append(TestCase.from_body(f"test_reference_{index}", body))
    return TestSuite(suite_version=1, tests=tuple(tests), spec_hash=spec_hash)


def bump_suite(suite: TestSuite, tests: Sequence[TestCase]) -> TestSuite:
    return replace(suite, suite_version=suite.suite_version + 1, tests=tuple(tests))
