"""Weighted-interleaving ratio prediction and brute-force ratio scanning.

Bandwidth-bound workloads can beat all-local placement by spreading
demand across both tiers; ``scan_ratios`` simulates the full ratio curve
(the oracle), while ``forecast`` predicts the best ratio and speedup from
a single local run via the latency-times-metric predictor and a fitted
per-platform linear map.  Latency-bound workloads get the simple linear
slowdown model ``slowdown_at`` instead.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .breakdown import SlowdownReport
from .counters import CounterSnapshot, amortized_offcore_latency
from .devmodel import (
    CACHE_STALL_WEIGHT,
    CLOCK_GHZ,
    CPI_BASE,
    OTHER_BACKEND_FRAC,
    STORE_STALL_WEIGHT,
    DeviceProfile,
    WorkloadProfile,
    latency_cycles,
    local_snapshot,
    utilization,
)
from .errors import EmptyInput, InconsistentProfile, InvariantViolation, MissingFit
from .model import ModelParams, classify_sensitivity, metric_cache, metric_dram, metric_store


@dataclass(frozen=True)
class InterleaveRatio:
    """Remote-page fraction x = N/(M+N) of an M:N weighted-interleave setup."""

    remote_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.remote_fraction <= 1.0:
            raise InvariantViolation("remote_fraction must be in [0, 1]")

    @classmethod
    def from_counts(cls, local_pages: int, remote_pages: int) -> "InterleaveRatio":
        if local_pages < 0 or remote_pages < 0 or local_pages + remote_pages == 0:
            raise InvariantViolation("M, N must be >= 0 and not both zero")
        return cls(remote_pages / (local_pages + remote_pages))

    def as_counts(self, max_denominator: int = 100) -> tuple[int, int]:
        """Reduce to an (M, N) page pair on the policy surface."""
        frac = Fraction(self.remote_fraction).limit_denominator(max_denominator)
        return frac.denominator - frac.numerator, frac.numerator


@dataclass(frozen=True)
class InterleaveFit:
    """Per-platform linear maps from the R predictor to speedup and ratio."""

    platform: str
    ratio_slope: float
    ratio_intercept: float
    speedup_slope: float
    speedup_intercept: float

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "InterleaveFit":
        return cls(**json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class InterleaveForecast:
    label: str
    r_dram: float
    r_cache: float
    r_store: float
    best_ratio: InterleaveRatio
    predicted_speedup: float
    beneficial: bool

    def __post_init__(self):
        if self.beneficial and self.predicted_speedup <= 0:
            raise InvariantViolation("beneficial forecasts must predict positive speedup")


def slowdown_at(x: InterleaveRatio | float, components: SlowdownReport) -> float:
    """Linear latency-bound model: slowdown at remote fraction x.

    Scales the full-remote per-source slowdown sum (DRAM + cache + store,
    residual excluded) by the fraction of pages placed remote.
    """
    frac = x.remote_fraction if isinstance(x, InterleaveRatio) else float(x)
    total = sum(components.components.values())
    return frac * total


def r_components(
    s: CounterSnapshot, params: ModelParams
) -> tuple[float, float, float]:
    """Latency-weighted per-source predictors (one shared offcore latency)."""
    lam = amortized_offcore_latency(s)
    return (
        metric_dram(s, params) * lam,
        metric_cache(s) * lam,
        metric_store(s) * lam,
    )


def scan_point_seed(seed: int, index: int) -> int:
    """Derived per-ratio seed; keeps scans deterministic under sharding."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def simulate_ratio_point(
    w: WorkloadProfile,
    local: DeviceProfile,
    remote: DeviceProfile,
    x: float,
    seed: int = 0,
    jitter_rel: float = 0.0,
) -> float:
    """Estimated runtime (seconds) with fraction ``x`` of pages on the remote tier.

    Demand misses and bandwidth split proportionally to the page split;
    each tier serves its share at its own load-dependent latency.  x = 0
    is by construction the all-local run and x = 1 the all-remote run.
    """
    if not 0.0 <= x <= 1.0:
        raise InvariantViolation("ratio must be in [0, 1]")
    I = w.instructions
    n_miss = I * w.demand_miss_rate / 1000.0
    rho_l = utilization((1.0 - x) * w.read_bandwidth_demand_gbs, local)
    rho_r = utilization(x * w.read_bandwidth_demand_gbs, remote)
    lc_l = latency_cycles(local, rho_l)
    lc_r = latency_cycles(remote, rho_r)
    mixed = (1.0 - x) * lc_l + x * lc_r
    lc_l0 = latency_cycles(local, 0.0)
    cycles = (
        I * CPI_BASE
        + n_miss * mixed / w.mlp_depth
        + w.store_intensity * I * STORE_STALL_WEIGHT * (mixed / lc_l0)
        + w.prefetch_reliance * I * CACHE_STALL_WEIGHT * (mixed / lc_l0)
        + OTHER_BACKEND_FRAC * I
    )
    runtime = cycles / (CLOCK_GHZ * 1e9)
    if jitter_rel > 0.0:
        rng = np.random.default_rng(seed)
        runtime *= 1.0 + rng.normal() * jitter_rel
    return runtime


def scan_ratios(
    w: WorkloadProfile,
    local: DeviceProfile,
    remote: DeviceProfile,
    grid: int = 101,
    seed: int = 0,
    jitter_rel: float = 0.0,
    max_workers: int | None = None,
) -> list[tuple[float, float]]:
    """Simulated runtime at each ratio on an evenly spaced grid.

    Points are independent simulations with per-point derived seeds, so the
    curve is identical at any worker-pool size.
    """
    if grid < 2:
        raise InvariantViolation("grid must be >= 2")
    if w.read_bandwidth_demand_gbs > local.bandwidth_cap_gbs + remote.bandwidth_cap_gbs:
        raise InconsistentProfile(
            "bandwidth demand exceeds combined tier capacity; no ratio is feasible"
        )

    def point(j: int) -> tuple[float, float]:
        x = j / (grid - 1)
        rt = simulate_ratio_point(
            w, local, remote, x, seed=scan_point_seed(seed, j), jitter_rel=jitter_rel
        )
        return (x, rt)

    if max_workers is None or max_workers <= 1:
        return [point(j) for j in range(grid)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(point, range(grid)))


def best_scan_point(curve: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """(ratio, runtime) at the scan minimum; first grid point wins ties."""
    if not curve:
        raise EmptyInput("empty scan curve")
    return min(curve, key=lambda pt: (pt[1], pt[0]))


def fit_interleave(
    workloads: Sequence[WorkloadProfile],
    local: DeviceProfile,
    remote: DeviceProfile,
    params: ModelParams,
    grid: int = 101,
    seed: int = 0,
) -> InterleaveFit:
    """Calibrate the R -> (best ratio, speedup) linear maps from scanned workloads."""
    if len(workloads) < 3:
        raise EmptyInput("interleave fit needs >= 3 scanned workloads")
    rs, xs, gains = [], [], []
    for w in workloads:
        snap = local_snapshot(w, local)
        rs.append(sum(r_components(snap, params)))
        curve = scan_ratios(w, local, remote, grid=grid, seed=seed)
        best_x, best_rt = best_scan_point(curve)
        rt_local = curve[0][1]
        xs.append(best_x)
        gains.append((rt_local - best_rt) / rt_local)
    design = np.stack([np.asarray(rs), np.ones(len(rs))], axis=1)
    ratio_coef, *_ = np.linalg.lstsq(design, np.asarray(xs), rcond=None)
    gain_coef, *_ = np.linalg.lstsq(design, np.asarray(gains), rcond=None)
    return InterleaveFit(
        platform=f"{local.name}+{remote.name}",
        ratio_slope=float(ratio_coef[0]),
        ratio_intercept=float(ratio_coef[1]),
        speedup_slope=float(gain_coef[0]),
        speedup_intercept=float(gain_coef[1]),
    )


def forecast(
    s: CounterSnapshot,
    local: DeviceProfile,
    remote: DeviceProfile,
    params: ModelParams,
    fit: InterleaveFit | None,
    label: str = "",
) -> InterleaveForecast:
    """One-run interleaving forecast from a local-DRAM snapshot.

    Only bandwidth-bound snapshots are flagged beneficial; latency-bound
    workloads keep everything local (their curve is handled by
    ``slowdown_at``).
    """
    r_d, r_c, r_s = r_components(s, params)
    if classify_sensitivity(s, params) != "bandwidth_bound":
        return InterleaveForecast(
            label=label, r_dram=r_d, r_cache=r_c, r_store=r_s,
            best_ratio=InterleaveRatio(0.0), predicted_speedup=0.0, beneficial=False,
        )
    if fit is None:
        raise MissingFit("bandwidth-bound forecast needs a per-platform InterleaveFit")
    r_total = r_d + r_c + r_s
    best = min(max(fit.ratio_slope * r_total + fit.ratio_intercept, 0.0), 1.0)
    gain = fit.speedup_slope * r_total + fit.speedup_intercept
    if gain <= 0.0:
        return InterleaveForecast(
            label=label, r_dram=r_d, r_cache=r_c, r_store=r_s,
            best_ratio=InterleaveRatio(0.0), predicted_speedup=gain, beneficial=False,
        )
    return InterleaveForecast(
        label=label, r_dram=r_d, r_cache=r_c, r_store=r_s,
        best_ratio=InterleaveRatio(best), predicted_speedup=gain, beneficial=True,
    )


def write_scan_csv(curve: Sequence[tuple[float, float]], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["remote_fraction", "runtime_s"])
        for x, rt in curve:
            writer.writerow([repr(x), repr(rt)])


def write_forecast_csv(forecasts: Sequence[InterleaveForecast], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["label", "r_dram", "r_cache", "r_store",
             "best_remote_fraction", "predicted_speedup", "beneficial"]
        )
        for f in forecasts:
            writer.writerow(
                [f.label, repr(f.r_dram), repr(f.r_cache), repr(f.r_store),
                 repr(f.best_ratio.remote_fraction), repr(f.predicted_speedup),
                 str(f.beneficial).lower()]
            )
