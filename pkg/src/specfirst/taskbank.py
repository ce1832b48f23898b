"""Coding-problem bank: ingestion, filtering, pools, and balanced assignment.

Bank files are JSON arrays of task entries with keys exactly:
task_id, title, statement, difficulty ("easy"|"medium"|"hard"),
release_date (ISO-8601 date), reference_signature, tags, and optional
reference_tests (array of {"input": str, "expected": str}).

Reference tests are held out: they never reach a participant session and
exist only for post-hoc validation of final functions.
"""

from __future__ import annotations

import datetime as dt
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BankFormatError, BankIntegrityError, ConfigurationError
from .specmodel import ProblemSpec, parse_spec, serialize_spec

DIFFICULTIES = ("easy", "medium", "hard")


@dataclass(frozen=True)
class ReferenceTest:
    input: str
    expected: str


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    title: str
    statement: str
    difficulty: str
    release_date: dt.date
    reference_signature: str
    tags: tuple[str, ...] = ()
    reference_tests: tuple[ReferenceTest, ...] = ()


@dataclass(frozen=True)
class TaskPools:
    warmup: tuple[TaskRecord, ...]
    evaluation: tuple[TaskRecord, ...]

    def __post_init__(self) -> None:
        for t in self.warmup:
            if t.difficulty != "easy":
                raise ConfigurationError(f"warmup task {t.task_id} is not easy difficulty")
        for t in self.evaluation:
            if t.difficulty != "medium":
                raise ConfigurationError(f"evaluation task {t.task_id} is not medium difficulty")


@dataclass(frozen=True)
class Assignment:
    participant_id: str
    warmup_task: str
    evaluation_task: str
    assigned_at: float
    seed: int = 0


def _parse_record(raw: object, index: int) -> TaskRecord:
    if not isinstance(raw, dict):
        raise BankFormatError(f"record {index} is not an object", index=index)

    def need(key: str) -> str:
        if key not in raw:
            raise BankFormatError(f"record {index} missing key {key!r}", field=key, index=index)
        value = raw[key]
        if not isinstance(value, str):
            raise BankFormatError(f"record {index} key {key!r} must be a string", field=key, index=index)
        return value

    task_id = need("task_id")
    if not task_id:
        raise BankFormatError(f"record {index} has empty task_id", field="task_id", index=index)
    statement = need("statement")
    if not statement.strip():
        raise BankFormatError(f"record {index} has empty statement", field="statement", index=index)
    difficulty = need("difficulty")
    if difficulty not in DIFFICULTIES:
        raise BankFormatError(
            f"record {index} difficulty {difficulty!r} not in {DIFFICULTIES}", field="difficulty", index=index
        )
    try:
        release_date = dt.date.fromisoformat(need("release_date"))
    except ValueError as exc:
        raise BankFormatError(
            f"record {index} release_date is not an ISO-8601 date: {exc}", field="release_date", index=index
        ) from exc

    tags_raw = raw.get("tags", [])
    if not isinstance(tags_raw, list) or not all(isinstance(t, str) for t in tags_raw):
        raise BankFormatError(f"record {index} tags must be an array of strings", field="tags", index=index)

    ref_tests = []
    for j, rt in enumerate(raw.get("reference_tests", []) or []):
        if not isinstance(rt, dict) or "input" not in rt or "expected" not in rt:
            raise BankFormatError(
                f"record {index} reference_tests[{j}] needs 'input' and 'expected'",
                field="reference_tests",
                index=index,
            )
        ref_tests.append(ReferenceTest(input=str(rt["input"]), expected=str(rt["expected"])))

    return TaskRecord(
        task_id=task_id,
        title=need("title"),
        statement=statement,
        difficulty=difficulty,
        release_date=release_date,
        reference_signature=need("reference_signature"),
        tags=tuple(tags_raw),
        reference_tests=tuple(ref_tests),
    )


def ingest_bank(
    sources: Sequence[str | Path],
    *,
    difficulties: Iterable[str] | None = None,
    after: dt.date | None = None,
    exclude_ids: Iterable[str] = (),
) -> list[TaskRecord]:
    """Load task records from bank files, applying the difficulty/date filter.

    Records dated on or before ``after`` are dropped (the cutoff is strict).
    Duplicate task_ids across all sources raise BankIntegrityError.
    """
    wanted = set(difficulties) if difficulties is not None else None
    if wanted is not None and not wanted.issubset(DIFFICULTIES):
        raise ConfigurationError(f"unknown difficulty in filter: {sorted(wanted - set(DIFFICULTIES))}")
    excluded = set(exclude_ids)

    records: list[TaskRecord] = []
    seen: set[str] = set()
    for source in sources:
        path = Path(source)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BankFormatError(f"bank file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, list):
            raise BankFormatError(f"bank file {path} must contain a JSON array of task entries")
        for index, entry in enumerate(raw):
            record = _parse_record(entry, index)
            if record.task_id in seen:
                raise BankIntegrityError(f"duplicate task_id {record.task_id!r}")
            seen.add(record.task_id)
            if record.task_id in excluded:
                continue
            if wanted is not None and record.difficulty not in wanted:
                continue
            if after is not None and record.release_date <= after:
                continue
            records.append(record)
    return records


def build_pools(records: Sequence[TaskRecord], *, warmup_size: int = 3, evaluation_size: int = 3) -> TaskPools:
    """Split records into warmup (easy) and evaluation (medium) pools.

    Takes the first N of each difficulty in bank order; the operator curates
    the bank files themselves to control which problems are candidates.
    """
    easy = [t for t in records if t.difficulty == "easy"]
    medium = [t for t in records if t.difficulty == "medium"]
    if len(easy) < warmup_size:
        raise ConfigurationError(f"need {warmup_size} easy tasks for the warmup pool, found {len(easy)}")
    if len(medium) < evaluation_size:
        raise ConfigurationError(f"need {evaluation_size} medium tasks for the evaluation pool, found {len(medium)}")
    return TaskPools(warmup=tuple(easy[:warmup_size]), evaluation=tuple(medium[:evaluation_size]))


def assign_tasks(
    pools: TaskPools,
    participant_id: str,
    history: Sequence[Assignment],
    seed: int,
    *,
    assigned_at: float = 0.0,
) -> Assignment:
    """Assign one warmup and one evaluation task.

    The evaluation task is chosen by balanced randomization: among the
    evaluation tasks with the minimum prior assignment count in history,
    pick uniformly at random. The warmup pick is uniform and unblocked
    (repeats across participants are allowed). Pure function of
    (pools, history, seed).
    """
    if not pools.warmup or not pools.evaluation:
        raise ConfigurationError("both task pools must be non-empty")

    counts = {t.task_id: 0 for t in pools.evaluation}
    for a in history:
        if a.evaluation_task in counts:
            counts[a.evaluation_task] += 1
    minimum = min(counts.values())
    candidates = sorted(tid for tid, c in counts.items() if c == minimum)

    # Independent streams so the warmup draw never perturbs the blocked draw.
    rng_warm = random.Random(f"{seed}:warmup")
    rng_eval = random.Random(f"{seed}:evaluation")
    warmup_task = pools.warmup[rng_warm.randrange(len(pools.warmup))].task_id
    evaluation_task = candidates[rng_eval.randrange(len(candidates))]

    return Assignment(
        participant_id=participant_id,
        warmup_task=warmup_task,
        evaluation_task=evaluation_task,
        assigned_at=assigned_at,
        seed=seed,
    )


def spec_document_for_task(task: TaskRecord) -> str:
    """Synthesize the TOML specification document that seeds a session.

    The function name is taken from the reference signature; the problem
    statement becomes the description. Operators may pre-author richer spec
    documents instead; this is the self-contained default.
    """
    signature = task.reference_signature.strip()
    name = signature.split("(", 1)[0].strip() or "solve"
    spec = ProblemSpec(
        function_name=name,
        signature=signature,
        description=task.statement,
        constraints=(),
        examples=(),
    )
    return serialize_spec(spec)


def spec_for_task(task: TaskRecord) -> ProblemSpec:
    return parse_spec(spec_document_for_task(task))


@dataclass
class AssignmentHistory:
    """Append-only assignment history persisted as JSONL, single writer."""

    path: Path
    assignments: list[Assignment] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> "AssignmentHistory":
        path = Path(path)
        assignments = []
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                assignments.append(
                    Assignment(
                        participant_id=obj["participant_id"],
                        warmup_task=obj["warmup_task"],
                        evaluation_task=obj["evaluation_task"],
                        assigned_at=obj["assigned_at"],
                        seed=obj.get("seed", 0),
                    )
                )
        return cls(path=path, assignments=assignments)

    def append(self, assignment: Assignment) -> None:
        self.assignments.append(assignment)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "participant_id": assignment.participant_id,
                        "warmup_task": assignment.warmup_task,
                        "evaluation_task": assignment.evaluation_task,
                        "assigned_at": assignment.assigned_at,
                        "seed": assignment.seed,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
