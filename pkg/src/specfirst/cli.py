"""Operator command line.

Subcommands: ingest, serve, run-script, metrics, summarize, verify-bundle,
validate-against-reference, make-demo. All are non-interactive; exit code 0
on success, 1 on a diagnosed failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from pathlib import Path

from . import bundle as bundle_mod
from .clock import VirtualClock
from .config import apply_env_overrides, build_engine, load_config
from .demo import build_demo_workspace
from .driver import headless_run, load_script
from .errors import SpecfirstError
from .harness import DEFAULT_PROFILE, ExecutionLimits, FunctionArtifact, execute, synthesize_reference_suite
from .metrics import metrics_csv_text, summarize_rows
from .taskbank import build_pools, ingest_bank


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="path to the TOML config file")


def _load_config(args: argparse.Namespace):
    return apply_env_overrides(load_config(args.config))


def cmd_ingest(args: argparse.Namespace) -> int:
    exclude = []
    if args.exclude:
        exclude = [line.strip() for line in Path(args.exclude).read_text(encoding="utf-8").splitlines() if line.strip()]
    after = dt.date.fromisoformat(args.after) if args.after else None
    difficulties = set(args.difficulty) if args.difficulty else None
    records = ingest_bank(args.bank, difficulties=difficulties, after=after, exclude_ids=exclude)
    out = [
        {
            "task_id": r.task_id,
            "title": r.title,
            "difficulty": r.difficulty,
            "release_date": r.release_date.isoformat(),
            "tags": list(r.tags),
        }
        for r in records
    ]
    print(json.dumps(out, indent=2))
    print(f"{len(records)} records after filtering", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    config = _load_config(args)
    serve(config)
    return 0


def cmd_run_script(args: argparse.Namespace) -> int:
    config = _load_config(args)
    script = load_script(args.script)
    clock = VirtualClock()
    engine = build_engine(config, clock=clock)
    pools = None
    if config.bank.paths:
        records = ingest_bank([config.resolve(p) for p in config.bank.paths], exclude_ids=config.bank.exclude_ids)
        pools = build_pools(records, warmup_size=config.bank.warmup_size, evaluation_size=config.bank.evaluation_size)
    if pools is None:
        print("run-script requires a task bank in the config", file=sys.stderr)
        return 1
    outcome = headless_run(
        engine,
        clock,
        script,
        pools=pools,
        history=[],
        assignment_seed=config.bank.assignment_seed,
        export_dir=args.out or config.resolve(config.export_dir),
        budget_seconds=config.session.budget_seconds,
        debounce_seconds=config.session.debounce_seconds,
        session_id=args.session_id,
    )
    print(str(outcome.bundle_dir))
    print((outcome.bundle_dir / "metrics.csv").read_text(encoding="utf-8"), end="", file=sys.stderr)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    metrics, csv_text = bundle_mod.recompute_bundle_metrics(args.bundle)
    (Path(args.bundle) / "metrics.csv").write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    for warning in metrics.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    rows = []
    excluded = 0
    for bundle_dir in args.bundles:
        if args.exclude_interrupted:
            summary_obj = bundle_mod.load_session_summary(bundle_dir)
            if summary_obj.get("metrics_flags", {}).get("interrupted_outlier"):
                excluded += 1
                print(f"excluding interrupted-outlier session in {bundle_dir}", file=sys.stderr)
                continue
        text = (Path(bundle_dir) / "metrics.csv").read_text(encoding="utf-8")
        rows.extend(bundle_mod.parse_metrics_csv(text))
    summary = summarize_rows(rows)
    summary["excluded_interrupted_sessions"] = excluded
    out_path = Path(args.out)
    out_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out_path} ({summary['n_sessions']} sessions)")
    if args.correlations_csv:
        lines = ["x,y,n,rho"]
        for entry in summary["correlations"]:
            rho = "" if entry["rho"] is None else f"{entry['rho']:.6f}"
            lines.append(f"{entry['x']},{entry['y']},{entry['n']},{rho}")
        Path(args.correlations_csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.correlations_csv}")
    return 0


def cmd_verify_bundle(args: argparse.Namespace) -> int:
    failures = 0
    for bundle_dir in args.bundles:
        problems = bundle_mod.verify_bundle(bundle_dir)
        if problems:
            failures += 1
            print(f"FAIL {bundle_dir}")
            for problem in problems:
                print(f"  - {problem}")
        else:
            print(f"OK   {bundle_dir}")
    return 1 if failures else 0


def cmd_validate_reference(args: argparse.Namespace) -> int:
    bundle_dir = Path(args.bundle)
    summary = bundle_mod.load_session_summary(bundle_dir)
    events = bundle_mod.load_events(bundle_dir)
    function_hash = None
    for event in reversed(events):
        if event.action in ("ask_function", "regenerate_function") and event.payload_hash:
            function_hash = event.payload_hash
            break
    if function_hash is None:
        print("bundle has no generated function to validate", file=sys.stderr)
        return 1
    source = bundle_mod.read_artifact(bundle_dir, function_hash)

    records = ingest_bank(args.bank)
    task = next((t for t in records if t.task_id == summary["task_id"]), None)
    if task is None:
        print(f"task {summary['task_id']!r} not found in bank", file=sys.stderr)
        return 1
    if not task.reference_tests:
        print(f"task {task.task_id} has no reference tests", file=sys.stderr)
        return 1

    suite = synthesize_reference_suite(
        summary.get("spec_function_name", ""), [(rt.input, rt.expected) for rt in task.reference_tests]
    )
    function = FunctionArtifact.from_source(source, version=1, suite_version=1)
    report = execute(suite, function, DEFAULT_PROFILE, ExecutionLimits())
    names = {t.test_id: t.name for t in suite.tests}
    print(
        json.dumps(
            {
                "task_id": task.task_id,
                "pass_count": report.pass_count,
                "total_count": report.total_count,
                "all_pass": report.all_pass,
                "per_test": [
                    {"name": names[r.test_id], "outcome": r.outcome, "message": r.failure_message}
                    for r in report.per_test
                ],
            },
            indent=2,
        )
    )
    return 0 if report.all_pass else 3


def cmd_make_demo(args: argparse.Namespace) -> int:
    config = build_demo_workspace(args.dir)
    print(f"demo workspace ready under {args.dir} (backend={config.gateway.backend})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specfirst", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, filter, and list task bank records")
    p.add_argument("--bank", action="append", required=True, help="bank JSON file (repeatable)")
    p.add_argument("--difficulty", action="append", choices=["easy", "medium", "hard"])
    p.add_argument("--after", default=None, help="keep only records strictly after this ISO date")
    p.add_argument("--exclude", default=None, help="file with task_ids to exclude, one per line")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("serve", help="run the local workbench service")
    _add_config_flag(p)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("run-script", help="run a scripted headless session and export its bundle")
    p.add_argument("script", help="script JSON file")
    _add_config_flag(p)
    p.add_argument("--out", default=None, help="export directory (default: config export_dir)")
    p.add_argument("--session-id", default=None)
    p.set_defaults(fn=cmd_run_script)

    p = sub.add_parser("metrics", help="recompute metrics.csv for an exported bundle")
    p.add_argument("bundle")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("summarize", help="aggregate bundles into study_summary.json")
    p.add_argument("bundles", nargs="+")
    p.add_argument("--out", default="study_summary.json")
    p.add_argument("--correlations-csv", default=None)
    p.add_argument(
        "--exclude-interrupted",
        action="store_true",
        help="sensitivity check: drop sessions flagged as interrupted outliers",
    )
    p.set_defaults(fn=cmd_summarize)

    p = sub.add_parser("verify-bundle", help="check bundle hash closure and schemas")
    p.add_argument("bundles", nargs="+")
    p.set_defaults(fn=cmd_verify_bundle)

    p = sub.add_parser("validate-against-reference", help="run a bundle's final function against held-out tests")
    p.add_argument("--bundle", required=True)
    p.add_argument("--bank", action="append", required=True)
    p.set_defaults(fn=cmd_validate_reference)

    p = sub.add_parser("make-demo", help="build the offline demo workspace (bank, fixtures, scripts)")
    p.add_argument("--dir", default="demo")
    p.set_defaults(fn=cmd_make_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SpecfirstError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
