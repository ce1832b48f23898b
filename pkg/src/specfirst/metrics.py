"""Session metrics and study-level descriptive statistics.

All dependent variables are derived from the event log plus execution
reports, so the exported bundle alone is sufficient to recompute every
number (log-is-truth). Time-to-pass runs from the first suite production to
the first all-pass run and is assigned the full budget when no run passes.
"""

from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import StatsDomainError, UndefinedCorrelationError
from .harness import DEFAULT_PROFILE, ExecutionReport, RunnerProfile, TestSuite
from .telemetry import SessionEvent

# Wall-clock gap between consecutive events that flags a session as an
# interrupted outlier (excluded only by an explicit analysis-time toggle).
INTERRUPTION_GAP_SECONDS = 300.0

GENERATION_ACTIONS = ("ask_function", "regenerate_function")
PER_TEST_ACTIONS = ("explain_test", "regenerate_test", "delete_test", "edit_test")
SUITE_PRODUCTION_ACTIONS = ("produce_suite", "regenerate_suite")

METRICS_CSV_COLUMNS = (
    "session_id",
    "task_id",
    "PassAll",
    "PassRate",
    "TestCoverage",
    "TestDiversity",
    "TimeToPass",
    "IterationsToPass",
    "TestEdits",
    "SuiteRegenerations",
    "AdviceTriggers",
    "TotalTokens",
)


@dataclass(frozen=True)
class SessionMetrics:
    pass_all: int
    pass_rate: float | None
    test_coverage: float | None
    test_diversity: float | None
    time_to_pass: float | None
    iterations_to_pass: int
    test_edits: int
    suite_regenerations: int
    advice_triggers: int
    total_tokens: int
    budget_capped: bool
    interrupted_outlier: bool
    warnings: tuple[str, ...] = ()


# --- test diversity -------------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+")


def tokenize_test_body(body: str, boilerplate: frozenset[str] = DEFAULT_PROFILE.boilerplate_tokens) -> set[str]:
    """Identifier/literal tokens of a test body, minus runner boilerplate.

    Case-sensitive; splitting on non-identifier characters keeps whole
    identifiers (``two_sum`` is one token).
    """
    return {tok for tok in _TOKEN_RE.findall(body) if tok not in boilerplate}


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union)


def diversity_from_token_sets(token_sets: Sequence[set[str]]) -> float:
    """1 minus the mean pairwise Jaccard similarity; < 2 sets gives 0."""
    n = len(token_sets)
    if n < 2:
        return 0.0
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += jaccard(token_sets[i], token_sets[j])
            pairs += 1
    return 1.0 - total / pairs


def test_diversity(suite: TestSuite, profile: RunnerProfile = DEFAULT_PROFILE) -> float:
    return diversity_from_token_sets([tokenize_test_body(t.body, profile.boilerplate_tokens) for t in suite.tests])


# --- per-session metrics --------------------------------------------------

def _pair_runs(
    events: Sequence[SessionEvent], reports: Sequence[ExecutionReport], warnings: list[str]
) -> list[tuple[SessionEvent, ExecutionReport]]:
    run_events = [e for e in events if e.action == "run_tests"]
    if len(run_events) != len(reports):
        warnings.append(f"log has {len(run_events)} run_tests events but {len(reports)} reports")
    return list(zip(run_events, reports))


def compute_session_metrics(
    events: Sequence[SessionEvent],
    reports: Sequence[ExecutionReport],
    budget_seconds: float,
    *,
    final_suite: TestSuite | None = None,
    suite_source_loader: Callable[[], str | None] | None = None,
    profile: RunnerProfile = DEFAULT_PROFILE,
) -> SessionMetrics:
    """Derive all dependent variables for one terminal session.

    ``reports`` must be the session's execution reports in run order.
    Diversity comes from ``final_suite`` when the caller has it in memory,
    otherwise from the last suite artifact via ``suite_source_loader``.
    """
    warnings: list[str] = []
    runs = _pair_runs(events, reports, warnings)

    produce_events = [e for e in events if e.action == "produce_suite"]
    first_produce_t = produce_events[0].t if produce_events else None
    if first_produce_t is None:
        warnings.append("log has no produce_suite event; time and pass metrics are undefined")

    first_all_pass: tuple[SessionEvent, ExecutionReport] | None = None
    for event, report in runs:
        if report.all_pass:
            first_all_pass = (event, report)
            break

    generation_events = [e for e in events if e.action in GENERATION_ACTIONS]
    if first_all_pass is not None:
        cutoff_seq = first_all_pass[0].seq
        iterations = sum(1 for e in generation_events if e.seq <= cutoff_seq)
    else:
        iterations = len(generation_events)

    test_edits = sum(1 for e in events if e.action in PER_TEST_ACTIONS)
    productions = sum(1 for e in events if e.action in SUITE_PRODUCTION_ACTIONS)
    suite_regenerations = max(0, productions - 1)
    advice_triggers = sum(1 for e in events if e.action == "advice_generated")
    total_tokens = sum(e.tokens.total for e in events if e.tokens is not None)

    final_report = runs[-1][1] if runs else None
    if first_produce_t is None:
        pass_all = 0
        pass_rate = None
        coverage = None
        time_to_pass = None
        budget_capped = False
    else:
        pass_all = 1 if (final_report is not None and final_report.all_pass) else 0
        pass_rate = (
            final_report.pass_count / final_report.total_count
            if final_report is not None and final_report.total_count > 0
            else None
        )
        coverage = final_report.coverage if final_report is not None else None
        if first_all_pass is not None:
            time_to_pass = first_all_pass[0].t - first_produce_t
            budget_capped = False
        else:
            time_to_pass = float(budget_seconds)
            budget_capped = True

    diversity: float | None = None
    if final_suite is not None:
        diversity = test_diversity(final_suite, profile)
    elif suite_source_loader is not None:
        source = suite_source_loader()
        if source is not None:
            diversity = diversity_from_suite_source(source, profile)
        elif produce_events:
            warnings.append("final suite artifact unavailable; diversity omitted")
    elif produce_events:
        warnings.append("no suite supplied; diversity omitted")

    return SessionMetrics(
        pass_all=pass_all,
        pass_rate=pass_rate,
        test_coverage=coverage,
        test_diversity=diversity,
        time_to_pass=time_to_pass,
        iterations_to_pass=iterations,
        test_edits=test_edits,
        suite_regenerations=suite_regenerations,
        advice_triggers=advice_triggers,
        total_tokens=total_tokens,
        budget_capped=budget_capped,
        interrupted_outlier=has_interruption_gap(events),
        warnings=tuple(warnings),
    )


def diversity_from_suite_source(source: str, profile: RunnerProfile = DEFAULT_PROFILE) -> float:
    """Recompute diversity from a stored suite artifact (the runnable file)."""
    from .gateway import split_test_functions

    tests = split_test_functions(source, test_prefix=profile.test_prefix)
    return diversity_from_token_sets([tokenize_test_body(t.body, profile.boilerplate_tokens) for t in tests])


def has_interruption_gap(events: Sequence[SessionEvent], gap_seconds: float = INTERRUPTION_GAP_SECONDS) -> bool:
    for previous, current in zip(events, events[1:]):
        if current.t - previous.t > gap_seconds:
            return True
    return False


def last_suite_payload_hash(events: Sequence[SessionEvent]) -> str | None:
    suite_actions = set(SUITE_PRODUCTION_ACTIONS) | {"regenerate_test", "delete_test", "edit_test"}
    for event in reversed(events):
        if event.action in suite_actions and event.payload_hash:
            return event.payload_hash
    return None


# --- CSV row formatting ---------------------------------------------------

def _fmt(value: float | int | None, spec: str) -> str:
    if value is None:
        return ""
    return format(value, spec)


def metrics_csv_row(session_id: str, task_id: str, m: SessionMetrics) -> list[str]:
    return [
        session_id,
        task_id,
        str(m.pass_all),
        _fmt(m.pass_rate, ".3f"),
        _fmt(m.test_coverage, ".6f"),
        _fmt(m.test_diversity, ".6f"),
        _fmt(m.time_to_pass, ".3f"),
        str(m.iterations_to_pass),
        str(m.test_edits),
        str(m.suite_regenerations),
        str(m.advice_triggers),
        str(m.total_tokens),
    ]


def metrics_csv_text(session_id: str, task_id: str, m: SessionMetrics) -> str:
    header = ",".join(METRICS_CSV_COLUMNS)
    row = ",".join(metrics_csv_row(session_id, task_id, m))
    return header + "\n" + row + "\n"


# --- descriptive statistics ----------------------------------------------

@dataclass(frozen=True)
class DescriptiveStats:
    median: float
    iqr: float
    q1: float
    q3: float
    n: int


def _quantile_linear(sorted_values: Sequence[float], q: float) -> float:
    """Quantile with linear interpolation at position (n-1)*q (Type 7)."""
    n = len(sorted_values)
    if n == 1:
        return float(sorted_values[0])
    position = (n - 1) * q
    low = math.floor(position)
    high = math.ceil(position)
    if low == high:
        return float(sorted_values[low])
    fraction = position - low
    return sorted_values[low] * (1 - fraction) + sorted_values[high] * fraction


def descriptive_stats(values: Iterable[float]) -> DescriptiveStats:
    """Median (midpoint of middle two) and IQR with Type-7 linear quartiles."""
    data = sorted(float(v) for v in values)
    if not data:
        raise StatsDomainError("descriptive_stats requires a non-empty list")
    q1 = _quantile_linear(data, 0.25)
    q3 = _quantile_linear(data, 0.75)
    return DescriptiveStats(median=statistics.median(data), iqr=q3 - q1, q1=q1, q3=q3, n=len(data))


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        averaged = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = averaged
        i = j + 1
    return ranks


def _pearson(a: Sequence[float], b: Sequence[float]) -> float:
    mean_a = statistics.fmean(a)
    mean_b = statistics.fmean(b)
    cov = sum((x - mean_a) * (y - mean_b) for x, y in zip(a, b))
    var_a = sum((x - mean_a) ** 2 for x in a)
    var_b = sum((y - mean_b) ** 2 for y in b)
    if var_a == 0 or var_b == 0:
        raise UndefinedCorrelationError("zero rank variance; correlation undefined")
    return cov / math.sqrt(var_a * var_b)


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rank correlation with average ranks for ties."""
    if len(x) != len(y):
        raise StatsDomainError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise StatsDomainError("spearman_rho requires at least 3 observations")
    return _pearson(average_ranks(x), average_ranks(y))


# --- study-level summary ---------------------------------------------------

CONTINUOUS_VARIABLES = (
    "PassRate",
    "TestCoverage",
    "TestDiversity",
    "TimeToPass",
    "IterationsToPass",
    "TestEdits",
    "SuiteRegenerations",
    "AdviceTriggers",
    "TotalTokens",
)

DEFAULT_CORRELATION_PAIRS = (
    ("TestEdits", "PassRate"),
    ("TestDiversity", "PassRate"),
    ("TestCoverage", "PassRate"),
    ("IterationsToPass", "TimeToPass"),
    ("TotalTokens", "TimeToPass"),
)


def summarize_rows(
    rows: Sequence[dict[str, float | None]],
    pairs: Sequence[tuple[str, str]] = DEFAULT_CORRELATION_PAIRS,
) -> dict:
    """Aggregate parsed metrics rows into the study summary structure."""
    summary: dict = {"n_sessions": len(rows), "variables": {}, "correlations": []}
    pass_all_values = [row["PassAll"] for row in rows if row.get("PassAll") is not None]
    summary["variables"]["PassAll"] = {
        "n": len(pass_all_values),
        "proportion": (sum(pass_all_values) / len(pass_all_values)) if pass_all_values else None,
    }
    for name in CONTINUOUS_VARIABLES:
        values = [row[name] for row in rows if row.get(name) is not None]
        if values:
            stats = descriptive_stats(values)
            summary["variables"][name] = {
                "n": stats.n,
                "median": stats.median,
                "iqr": stats.iqr,
                "q1": stats.q1,
                "q3": stats.q3,
            }
        else:
            summary["variables"][name] = {"n": 0, "median": None, "iqr": None, "q1": None, "q3": None}
    for left, right in pairs:
        paired = [
            (row[left], row[right])
            for row in rows
            if row.get(left) is not None and row.get(right) is not None
        ]
        entry: dict = {"x": left, "y": right, "n": len(paired)}
        if len(paired) < 3:
            entry["rho"] = None
            entry["note"] = "fewer than 3 paired observations"
        else:
            try:
                entry["rho"] = spearman_rho([p[0] for p in paired], [p[1] for p in paired])
            except UndefinedCorrelationError:
                entry["rho"] = None
                entry["note"] = "undefined: zero rank variance"
        summary["correlations"].append(entry)
    return summary
