"""Subprocess test driver for the python-unittest runner profile.

Copied verbatim into each execution workspace and invoked there with an
isolated interpreter. Pure stdlib. Reads a manifest describing the solution
module, the test file, and the ordered test list; runs each test function;
emits the canonical JSON report:

    {"tests": [{"name", "outcome", "message"}], "coverage": {"executable", "executed"} | null}

Outcomes: pass | fail (AssertionError) | error (anything else). A progress
line is appended per completed test so the parent can salvage partial
results after a wall-timeout kill.

Failure messages are exception-only (no absolute paths, no tracebacks) so
reports stay byte-stable across workspaces.
"""

import argparse
import contextlib
import importlib.util
import io
import json
import os
import sys
import traceback


def executable_line_numbers(source, filename):
    """Line numbers that carry code, from the compiled line tables."""
    lines = set()
    stack = [compile(source, filename, "exec")]
    while stack:
        code = stack.pop()
        for _, _, lineno in code.co_lines():
            if lineno:
                lines.add(lineno)
        for const in code.co_consts:
            if hasattr(const, "co_lines"):
                stack.append(const)
    return lines


class LineCollector:
    def __init__(self, filename):
        # Import machinery absolutizes co_filename, so match on abspath.
        self.filename = os.path.abspath(filename)
        self.executed = set()

    def trace(self, frame, event, arg):
        if event == "line" and frame.f_code.co_filename == self.filename:
            self.executed.add(frame.f_lineno)
        return self.trace

    @contextlib.contextmanager
    def active(self):
        previous = sys.gettrace()
        sys.settrace(self.trace)
        try:
            yield
        finally:
            sys.settrace(previous)


def format_error(exc):
    parts = traceback.format_exception_only(type(exc), exc)
    text = "".join(parts).strip()
    # Workspace paths vary per run; strip them so messages stay byte-stable.
    return text.replace(os.getcwd() + os.sep, "")


def import_file(module_name, path, collector):
    spec = importlib.util.spec_from_file_location(module_name, path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[module_name] = module
    if collector is not None:
        with collector.active():
            spec.loader.exec_module(module)
    else:
        spec.loader.exec_module(module)
    return module


def run_test(func, collector):
    """Returns (outcome, message). stdout/stderr of the test are swallowed."""
    sink = io.StringIO()
    try:
        with contextlib.redirect_stdout(sink), contextlib.redirect_stderr(sink):
            if collector is not None:
                with collector.active():
                    func()
            else:
                func()
    except AssertionError as exc:
        return "fail", format_error(exc)
    except Exception as exc:  # noqa: BLE001 - every test exception is data
        return "error", format_error(exc)
    return "pass", None


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--manifest", required=True)
    args = parser.parse_args(argv)

    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)

    sys.path.insert(0, os.getcwd())
    solution_path = manifest["solution"]
    tests_path = manifest["tests_file"]
    test_entries = manifest["tests"]
    want_coverage = bool(manifest.get("coverage", True))
    report_path = manifest["report"]
    progress_path = manifest["progress"]

    collector = LineCollector(solution_path) if want_coverage else None

    executable = None
    if want_coverage:
        try:
            with open(solution_path, "r", encoding="utf-8") as fh:
                executable = executable_line_numbers(fh.read(), solution_path)
        except SyntaxError:
            executable = None

    progress = open(progress_path, "a", encoding="utf-8")

    def note(index, name, outcome, message):
        progress.write(json.dumps({"index": index, "name": name, "outcome": outcome, "message": message}) + "\n")
        progress.flush()

    results = []

    def finish(broken_message=None):
        for index, entry in enumerate(test_entries):
            if index < len(results):
                continue
            results.append({"name": entry["name"], "outcome": "error", "message": broken_message})
            note(index, entry["name"], "error", broken_message)
        coverage = None
        if want_coverage and executable:
            executed = collector.executed & executable
            coverage = {"executable": len(executable), "executed": len(executed)}
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump({"tests": results, "coverage": coverage}, fh, sort_keys=True)
        progress.close()
        return 0 if all(r["outcome"] == "pass" for r in results) and results else 1

    try:
        import_file("solution", solution_path, collector)
    except BaseException as exc:  # noqa: BLE001 - a broken solution is data
        return finish("solution failed to load: " + format_error(exc))

    try:
        test_module = import_file("solution_tests", tests_path, None)
    except BaseException as exc:  # noqa: BLE001
        return finish("test file failed to load: " + format_error(exc))

    for index, entry in enumerate(test_entries):
        func = getattr(test_module, entry["name_in_file"], None)
        if not callable(func):
            outcome, message = "error", "test function %r not found" % entry["name_in_file"]
        else:
            outcome, message = run_test(func, collector)
        results.append({"name": entry["name"], "outcome": outcome, "message": message})
        note(index, entry["name"], outcome, message)

    return finish()


if __name__ == "__main__":
    sys.exit(main())
