"""Rent-or-rebuild reorganization policy.

The maintenance loop accumulates the waste of each incremental round and
rebuilds the clustered store once the accumulated waste reaches alpha times
the last measured rebuild cost (the classic ski-rental trade-off). The choice
in a round is exclusive: a rebuild round contributes no incremental waste.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def alpha_from_scan_ratio(scan_ratio: float) -> float:
    """Positive root of x^2 + sigma*x - 1; equals 1 at sigma = 0, always in (0, 1]."""
    if scan_ratio < 0:
        raise ValueError("scan ratio must be non-negative")
    return (-scan_ratio + math.sqrt(scan_ratio * scan_ratio + 4.0)) / 2.0


def lazy_waste(records_read: int, members_found: int, read_cost: float) -> float:
    """Waste of a membership scan: (N_R - N_+) / N_R times the read cost.

    Reading nothing wastes nothing, so N_R = 0 yields 0.
    """
    if records_read < members_found or members_found < 0:
        raise ValueError("need records_read >= members_found >= 0")
    if records_read == 0:
        return 0.0
    return (records_read - members_found) / records_read * read_cost


@dataclass
class ReorgTrigger:
    """Accumulated-waste state driving the rebuild decision.

    reorg_cost is re-measured at every rebuild; accumulated resets to exactly 0
    there and is non-decreasing in between.
    """

    reorg_cost: float
    alpha: float = 1.0
    scan_ratio: float = 0.0
    accumulated: float = 0.0

    def __post_init__(self):
        if self.reorg_cost <= 0:
            raise ValueError("reorg cost must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def observe_cost(self, cost: float) -> None:
        if cost < 0:
            raise ValueError("cost must be non-negative")
        self.accumulated += cost

    def should_reorganize(self) -> bool:
        return self.accumulated >= self.alpha * self.reorg_cost

    def reorganized(self, measured_cost: float) -> None:
        """Record a rebuild: adopt its measured cost and reset the accumulator."""
        if measured_cost <= 0:
            raise ValueError("measured rebuild cost must be positive")
        self.reorg_cost = measured_cost
        self.accumulated = 0.0
