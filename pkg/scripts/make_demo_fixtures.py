#!/usr/bin/env python3
"""Build the offline demo workspace: bank, config, scripts, replay fixtures.

Usage: python scripts/make_demo_fixtures.py [target-dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from specfirst.demo import build_demo_workspace


def main() -> int:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo")
    build_demo_workspace(target)
    print(f"demo workspace ready: {target.resolve()}")
    print("next steps:")
    print(f"  specfirst run-script {target}/scripts/happy_path.json --config {target}/config.toml")
    print(f"  specfirst serve --config {target}/config.toml")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
