#!/usr/bin/env python3
"""End-to-end desk-scale pipeline: scripted sessions -> bundles -> summary.

Runs every demo script headlessly against the replay backend, verifies each
exported bundle's hash closure, recomputes metrics from the logs, and writes
the study-level summary. Everything is deterministic and offline.

Usage: python scripts/run_study_pipeline.py [demo-dir] [out-dir]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from specfirst.bundle import parse_metrics_csv, recompute_bundle_metrics, verify_bundle
from specfirst.clock import VirtualClock
from specfirst.config import build_engine, load_config
from specfirst.demo import build_demo_workspace
from specfirst.driver import headless_run, load_script
from specfirst.metrics import summarize_rows
from specfirst.taskbank import build_pools, ingest_bank


def main() -> int:
    demo_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo")
    out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else demo_dir / "pipeline-out"
    if not (demo_dir / "config.toml").exists():
        print(f"building demo workspace under {demo_dir} ...")
        build_demo_workspace(demo_dir)

    config = load_config(demo_dir / "config.toml")
    pools = build_pools(ingest_bank([config.resolve(p) for p in config.bank.paths]))

    rows = []
    for script_path in sorted((demo_dir / "scripts").glob("*.json")):
        clock = VirtualClock()
        engine = build_engine(config, clock=clock)
        outcome = headless_run(
            engine,
            clock,
            load_script(script_path),
            pools=pools,
            history=[],
            assignment_seed=config.bank.assignment_seed,
            export_dir=out_dir / "bundles",
            budget_seconds=config.session.budget_seconds,
            debounce_seconds=config.session.debounce_seconds,
            session_id=f"s-{script_path.stem}",
        )
        problems = verify_bundle(outcome.bundle_dir)
        status = "ok" if not problems else f"INTEGRITY PROBLEMS: {problems}"
        metrics, csv_text = recompute_bundle_metrics(outcome.bundle_dir)
        rows.extend(parse_metrics_csv(csv_text))
        print(f"{script_path.stem:>14}: {outcome.session.outcome:>14}  bundle={outcome.bundle_dir}  [{status}]")

    summary = summarize_rows(rows)
    summary_path = out_dir / "study_summary.json"
    summary_path.parent.mkdir(parents=True, exist_ok=True)
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"\nstudy summary -> {summary_path}")
    for name, stats in summary["variables"].items():
        print(f"  {name}: {stats}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
