"""Deterministic work clock for time-budgeted, reproducible runs.

Search budgets are expressed in seconds but measured on a virtual clock
that advances by counted algorithmic work (move evaluations, recursion
nodes, extraction windows, ...) at a fixed units-per-second rate. Two
runs with the same seed therefore stop at exactly the same point and
produce identical logs, which a wall-clock cutoff cannot guarantee.
Real elapsed time is recorded separately for reference only.

UNITS_PER_SECOND was calibrated once against wall time on a reference
desktop so that a "60 s" budget takes roughly a real minute; it can be
overridden per run when throughput differs.
"""

from __future__ import annotations

import time

UNITS_PER_SECOND = 800_000

# Per-operation charges, expressed in local-search-evaluation equivalents
# so shares across components track real effort (measured once on the
# reference machine alongside UNITS_PER_SECOND).
RECONNECT_NODE_UNITS = 1
EXTRACT_WINDOW_UNITS = 2

BUCKETS = ("ls", "pils_inject", "pils_extract", "other")


class WorkClock:
    """Counts work units against a budget, split by component."""

    def __init__(self, budget_seconds: float, units_per_second: int = UNITS_PER_SECOND):
        if budget_seconds <= 0:
            raise ValueError("budget must be positive")
        self.units_per_second = units_per_second
        self.budget_units = int(budget_seconds * units_per_second)
        self.units = 0
        self.by_bucket = {b: 0 for b in BUCKETS}
        self._t0 = time.perf_counter()

    def charge(self, units: int, bucket: str = "other") -> None:
        self.units += units
        self.by_bucket[bucket] += units

    def expired(self) -> bool:
        return self.units >= self.budget_units

    def virt_ms(self) -> int:
        return (self.units * 1000) // self.units_per_second

    def pils_units(self) -> int:
        return self.by_bucket["pils_inject"] + self.by_bucket["pils_extract"]

    def pils_virt_ms(self) -> int:
        return (self.pils_units() * 1000) // self.units_per_second

    def pils_share_percent(self) -> float:
        if self.units == 0:
            return 0.0
        return 100.0 * self.pils_units() / self.units

    def real_ms(self) -> int:
        return int((time.perf_counter() - self._t0) * 1000)
