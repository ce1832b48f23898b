"""Self-contained demo workspace: bank, scripts, and recorded replay fixtures.

Builds everything a fully offline run needs. Fixter recording works by
driving the real engine once with queued canned outputs while a recording
wrapper stores each reply under its request hash; afterwards the replay
backend serves the exact same session forever. The same fixture set backs
scripted runs, the HTTP service, and the browser UI, because prompts are a
pure function of (spec, suite, params).
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from .clock import VirtualClock
from .config import AppConfig, load_config
from .engine import SessionEngine
from .gateway import Gateway, GenerationParams, PromptLibrary, QueueBackend, RecordingBackend
from .harness import DEFAULT_PROFILE, ExecutionLimits
from .taskbank import build_pools, ingest_bank
from .driver import headless_run
from .telemetry import ArtifactStore

DEMO_MODEL = "demo-model"
DEMO_PARAMS = GenerationParams(model_id=DEMO_MODEL, temperature=0.0, seed=7, max_tokens=2048)

_BANK = [
    {
        "task_id": "easy-add",
        "title": "Add two numbers",
        "statement": "Return the sum of two integers a and b.",
        "difficulty": "easy",
        "release_date": "2025-01-10",
        "reference_signature": "add_numbers(a, b)",
        "tags": ["arithmetic"],
        "reference_tests": [{"input": "2, 3", "expected": "5"}, {"input": "-1, 1", "expected": "0"}],
    },
    {
        "task_id": "easy-clamp",
        "title": "Clamp a value",
        "statement": "Clamp value into the inclusive range [low, high].",
        "difficulty": "easy",
        "release_date": "2025-01-11",
        "reference_signature": "clamp(value, low, high)",
        "tags": ["arithmetic"],
        "reference_tests": [{"input": "5, 0, 3", "expected": "3"}],
    },
    {
        "task_id": "easy-vowels",
        "title": "Count vowels",
        "statement": "Count the vowels (aeiou, lowercase) in a string.",
        "difficulty": "easy",
        "release_date": "2025-01-12",
        "reference_signature": "count_vowels(text)",
        "tags": ["strings"],
        "reference_tests": [{"input": "\"banana\"", "expected": "3"}],
    },
    {
        "task_id": "med-freq-char",
        "title": "Most frequent character",
        "statement": (
            "Given a non-empty string, return the character that appears most often. "
            "If several characters tie for the highest count, return the one whose "
            "first occurrence in the string is earliest."
        ),
        "difficulty": "medium",
        "release_date": "2025-02-01",
        "reference_signature": "most_frequent_char(text)",
        "tags": ["strings", "counting"],
        "reference_tests": [
            {"input": "\"mississippi\"", "expected": "\"i\""},
            {"input": "\"abbb\"", "expected": "\"b\""},
        ],
    },
    {
        "task_id": "med-running-total",
        "title": "Running totals",
        "statement": (
            "Given a list of numbers, return the list of running totals: element i of "
            "the result is the sum of the first i+1 input elements. An empty input "
            "gives an empty list."
        ),
        "difficulty": "medium",
        "release_date": "2025-02-02",
        "reference_signature": "running_total(nums)",
        "tags": ["lists", "prefix-sums"],
        "reference_tests": [{"input": "[1, 2, 3]", "expected": "[1, 3, 6]"}],
    },
    {
        "task_id": "med-brackets",
        "title": "Balanced brackets",
        "statement": (
            "Return True when every round, square, and curly bracket in the string is "
            "properly matched and nested, ignoring all other characters; otherwise "
            "return False."
        ),
        "difficulty": "medium",
        "release_date": "2025-02-03",
        "reference_signature": "balanced_brackets(text)",
        "tags": ["strings", "stacks"],
        "reference_tests": [
            {"input": "\"([{}])\"", "expected": "True"},
            {"input": "\")(\"", "expected": "False"},
        ],
    },
]

_FREQ_SUITE = '''Here is a test suite for the specification.

```python
def test_single_char():
    assert most_frequent_char("a") == "a"

def test_simple_majority():
    assert most_frequent_char("abbb") == "b"

def test_tie_prefers_earliest():
    assert most_frequent_char("abab") == "a"

def test_three_distinct():
    assert most_frequent_char("xyz") == "x"

def test_longer_text():
    assert most_frequent_char("mississippi") == "i"
```
'''

_FREQ_EXPLAIN = (
    "This test feeds the string \"abab\" to most_frequent_char. Both characters "
    "appear twice, so the counts tie; the specification says ties are broken by "
    "earliest first occurrence, and 'a' occurs at index 0 before 'b' at index 1, "
    "so the expected answer is 'a'."
)

_FREQ_FUNCTION = '''The implementation scans characters in order so ties keep the earliest one.

```python
def most_frequent_char(text):
    best = None
    best_count = 0
    for ch in text:
        count = text.count(ch)
        if count > best_count:
            best = ch
            best_count = count
    return best
```
'''

_TOTAL_SUITE = '''```python
def test_empty_list():
    assert running_total([]) == []

def test_single_element():
    assert running_total([5]) == [5]

def test_mixed_signs():
    assert running_total([1, 2, -3]) == [1, 3, 0]
```
'''

_TOTAL_FUNCTION_BAD_1 = '''```python
def running_total(nums):
    return [sum(nums[:i]) for i in range(len(nums))]
```
'''

_TOTAL_ADVICE = (
    "The prefix slice is off by one: nums[:i] excludes the element at index i, so "
    "every running total lags one element behind. Slice through i+1 (or accumulate "
    "with a running variable) so the first output equals the first input."
)

_TOTAL_FUNCTION_BAD_2 = '''```python
def running_total(nums):
    return [sum(nums)] * len(nums)
```
'''

_BRACKET_SUITE = '''```python
def test_empty_string():
    assert balanced_brackets("") is True

def test_single_pair():
    assert balanced_brackets("()") is True

def test_curly_pair():
    assert balanced_brackets("{}") is True

def test_nested_mixture():
    assert balanced_brackets("([{}])") is True

def test_sequence_of_pairs():
    assert balanced_brackets("()[]{}") is True

def test_unclosed_opener():
    assert balanced_brackets("(") is False

def test_wrong_order():
    assert balanced_brackets(")(") is False

def test_mismatched_kinds():
    assert balanced_brackets("(]") is False

def test_ignores_other_characters():
    assert balanced_brackets("a(b)c") is True

def test_stray_closer():
    assert balanced_brackets("abc]") is False
```
'''

# Mapping bug: '}' is matched against '(' instead of '{', so the three tests
# that close a curly bracket fail and the other seven pass.
_BRACKET_FUNCTION_7_OF_10 = '''```python
def balanced_brackets(text):
    pairs = {")": "(", "]": "[", "}": "("}
    stack = []
    for ch in text:
        if ch in "([{":
            stack.append(ch)
        elif ch in pairs:
            if not stack or stack.pop() != pairs[ch]:
                return False
    return not stack
```
'''

HAPPY_PATH_SCRIPT = {
    "participant_id": "p-happy",
    "task_id": "med-freq-char",
    "budget_seconds": 2400.0,
    "step_seconds": 30.0,
    "profile": {
        "participant_id": "p-happy",
        "programming_experience_years": 6,
        "python_familiarity": "high",
        "prior_tdd_experience": "medium",
        "prior_llm_codegen_use": "occasionally",
    },
    "steps": [
        {"action": "produce_suite"},
        {"action": "explain", "test_index": 2},
        {"action": "delete_test", "test_index": 3},
        {"action": "ask_function"},
    ],
}
HAPPY_PATH_REPLIES = [_FREQ_SUITE, _FREQ_EXPLAIN, _FREQ_FUNCTION]

NEVER_PASS_SCRIPT = {
    "participant_id": "p-stuck",
    "task_id": "med-running-total",
    "budget_seconds": 2400.0,
    "step_seconds": 60.0,
    "steps": [
        {"action": "produce_suite"},
        {"action": "ask_function"},
        {"action": "request_advice"},
        {"action": "regenerate_function", "use_advice": True},
        {"action": "advance_clock", "seconds": 2400.0},
        {"action": "tick"},
    ],
}
NEVER_PASS_REPLIES = [_TOTAL_SUITE, _TOTAL_FUNCTION_BAD_1, _TOTAL_ADVICE, _TOTAL_FUNCTION_BAD_2]

PARTIAL_FAIL_SCRIPT = {
    "participant_id": "p-partial",
    "task_id": "med-brackets",
    "budget_seconds": 2400.0,
    "step_seconds": 45.0,
    "steps": [
        {"action": "produce_suite"},
        {"action": "ask_function"},
        {"action": "close"},
    ],
}
PARTIAL_FAIL_REPLIES = [_BRACKET_SUITE, _BRACKET_FUNCTION_7_OF_10]

DEMO_SCRIPTS = {
    "happy_path": (HAPPY_PATH_SCRIPT, HAPPY_PATH_REPLIES),
    "never_pass": (NEVER_PASS_SCRIPT, NEVER_PASS_REPLIES),
    "partial_fail": (PARTIAL_FAIL_SCRIPT, PARTIAL_FAIL_REPLIES),
}

_CONFIG_TOML = """data_dir = "data"
export_dir = "bundles"

[bank]
paths = ["bank.json"]
warmup_size = 3
evaluation_size = 3
assignment_seed = 1234

[session]
budget_seconds = 2400.0
debounce_seconds = 0.3

[gateway]
backend = "replay"
model_id = "demo-model"
temperature = 0.0
seed = 7
max_tokens = 2048
fixtures_dir = "fixtures"

[runner]
wall_timeout_seconds = 30.0
memory_cap_mb = 512

[service]
host = "127.0.0.1"
port = 8756
"""


def write_demo_bank(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_BANK, indent=2) + "\n", encoding="utf-8")
    return path


def record_demo_fixtures(root: str | Path) -> Path:
    """Record all demo replay fixtures by running each script once."""
    root = Path(root)
    fixtures_dir = root / "fixtures"
    fixtures_dir.mkdir(parents=True, exist_ok=True)
    bank_path = root / "bank.json"
    if not bank_path.exists():
        write_demo_bank(bank_path)
    pools = build_pools(ingest_bank([bank_path]))

    scratch = root / ".recording"
    for name, (script, replies) in DEMO_SCRIPTS.items():
        clock = VirtualClock()
        gateway = Gateway(RecordingBackend(QueueBackend(list(replies)), fixtures_dir))
        store = ArtifactStore(scratch / name / "artifacts")
        engine = SessionEngine(
            gateway=gateway,
            prompts=PromptLibrary(),
            params=DEMO_PARAMS,
            clock=clock,
            store=store,
            runner_profile=DEFAULT_PROFILE,
            limits=ExecutionLimits(),
        )
        headless_run(
            engine,
            clock,
            script,
            pools=pools,
            history=[],
            assignment_seed=1234,
            export_dir=scratch / name / "bundles",
            budget_seconds=float(script.get("budget_seconds", 2400.0)),
        )
    shutil.rmtree(scratch, ignore_errors=True)
    return fixtures_dir


def build_demo_workspace(root: str | Path) -> AppConfig:
    """Create bank.json, config.toml, scripts/, and recorded fixtures under root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_demo_bank(root / "bank.json")
    (root / "config.toml").write_text(_CONFIG_TOML, encoding="utf-8")
    scripts_dir = root / "scripts"
    scripts_dir.mkdir(exist_ok=True)
    for name, (script, _) in DEMO_SCRIPTS.items():
        (scripts_dir / f"{name}.json").write_text(json.dumps(script, indent=2) + "\n", encoding="utf-8")
    record_demo_fixtures(root)
    return load_config(root / "config.toml")
