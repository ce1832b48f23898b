"""Time sources: wall clock for live sessions, virtual clock for scripted runs.

Timestamps are float epoch seconds throughout; JSON round-trips them exactly,
which keeps replayed sessions byte-identical.
"""

from __future__ import annotations

import time
from typing import Protocol

# 2025-01-01T00:00:00Z; fixed origin so scripted runs are reproducible.
VIRTUAL_EPOCH = 1735689600.0


class Clock(Protocol):
    def now(self) -> float: ...


class WallClock:
    def now(self) -> float:
        return time.time()


class VirtualClock:
    """Manually advanced clock for deterministic scripted sessions."""

    def __init__(self, start: float = VIRTUAL_EPOCH):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("cannot advance a clock backwards")
        self._now += float(seconds)
        return self._now
