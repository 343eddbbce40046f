"""Slowdown measurement and per-source stall decomposition.

Given a local/remote :class:`~suplab.counters.RunPair`, the measured
slowdown is the relative runtime increase, and the stall-based estimate
splits it into store / L1 / L2 / L3 / DRAM components plus an
unattributed residual ("Other").  Components may be negative: a source
can improve on the remote tier.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .counters import STALL_SOURCES, RunPair
from .errors import EmptyInput

_COMPONENT_COUNTERS = {
    "store": "store_buffer_full_stall_cycles",
    "L1": "stall_l1",
    "L2": "stall_l2",
    "L3": "stall_l3",
    "DRAM": "llc_miss_demand_stall_cycles",
}


@dataclass(frozen=True)
class SlowdownReport:
    label: str
    total_measured: float
    total_stall_estimate: float
    total_backend_estimate: float
    components: dict[str, float]
    residual: float


def measure_slowdown(rp: RunPair) -> float:
    """Relative runtime increase; negative means the remote tier was faster."""
    if rp.local_runtime == 0:
        raise ZeroDivisionError("local_runtime is zero")
    return (rp.remote_runtime - rp.local_runtime) / rp.local_runtime


def decompose(rp: RunPair) -> SlowdownReport:
    """Split the stall-cycle delta into the five backend sources.

    Deltas are normalized by the local run's total cycles; the residual is
    whatever part of the backend-stall delta the five sources do not cover,
    so components + residual always reconstruct the backend estimate.
    """
    c = rp.local.total_cycles
    if c == 0:
        raise ZeroDivisionError("local total_cycles is zero")
    components = {
        src: (getattr(rp.remote, f) - getattr(rp.local, f)) / c
        for src, f in _COMPONENT_COUNTERS.items()
    }
    stall_est = (rp.remote.stall_cycles_total - rp.local.stall_cycles_total) / c
    backend_est = (rp.remote.backend_stall_cycles - rp.local.backend_stall_cycles) / c
    residual = backend_est - sum(components.values())
    return SlowdownReport(
        label=rp.label,
        total_measured=measure_slowdown(rp),
        total_stall_estimate=stall_est,
        total_backend_estimate=backend_est,
        components=components,
        residual=residual,
    )


class AccuracyCdf:
    """Sorted |estimate - measured| distribution with quantile lookup."""

    def __init__(self, diffs: Sequence[float]):
        if len(diffs) == 0:
            raise EmptyInput("no difference samples")
        self.diffs = sorted(abs(d) for d in diffs)

    def quantile(self, q: float) -> float:
        if not 0 < q <= 1:
            raise ValueError("quantile must be in (0, 1]")
        idx = math.ceil(q * len(self.diffs)) - 1
        return self.diffs[idx]

    def fraction_within(self, tol: float) -> float:
        return sum(1 for d in self.diffs if d <= tol) / len(self.diffs)

    def __len__(self) -> int:
        return len(self.diffs)


def estimate_accuracy(pairs: Sequence[RunPair], which: str = "stall") -> AccuracyCdf:
    """CDF of |stall-based estimate - measured slowdown| over a pair set."""
    if not pairs:
        raise EmptyInput("no run pairs")
    if which not in ("stall", "backend"):
        raise ValueError("which must be 'stall' or 'backend'")
    diffs = []
    for rp in pairs:
        rep = decompose(rp)
        est = rep.total_stall_estimate if which == "stall" else rep.total_backend_estimate
        diffs.append(est - rep.total_measured)
    return AccuracyCdf(diffs)


def write_report_csv(reports: Sequence[SlowdownReport], path: str | Path) -> None:
    """One row per pair: measured, estimates, five components, residual."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["label", "measured", "stall_estimate", "backend_estimate"]
            + [f"comp_{src}" for src in STALL_SOURCES]
            + ["residual"]
        )
        for r in reports:
            writer.writerow(
                [r.label, repr(r.total_measured), repr(r.total_stall_estimate),
                 repr(r.total_backend_estimate)]
                + [repr(r.components[src]) for src in STALL_SOURCES]
                + [repr(r.residual)]
            )


def write_report_long_csv(reports: Sequence[SlowdownReport], path: str | Path) -> None:
    """Stacked-bar-friendly long format: one (label, source, value) row each."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "source", "value"])
        for r in reports:
            for src in STALL_SOURCES:
                writer.writerow([r.label, src, repr(r.components[src])])
            writer.writerow([r.label, "other", repr(r.residual)])
            writer.writerow([r.label, "measured", repr(r.total_measured)])
