"""Synthetic memory-device and workload model.

This module is the test oracle for the rest of the package: it produces

* request-latency samples with configurable tails and load-dependent
  queueing (``sample_latencies``),
* nearest-rank percentile analysis (``latency_percentiles``),
* internally consistent local/remote counter pairs for any workload
  profile (``synthesize_runpair``), and
* the calibration-run and fixture-suite builders used by tests and the
  ``demo`` pipeline.

Latency/cycle conversion uses a fixed 2.1 GHz core clock so ns-based
device profiles and cycle-based counters interoperate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .counters import CounterSnapshot, RunPair
from .errors import InconsistentProfile, InvariantViolation, LoadOutOfRange
from .model import (
    SENSITIVITY_MARGIN,
    ModelParams,
    metric_cache,
    metric_dram,
    metric_store,
)

CLOCK_GHZ = 2.1
CYCLES_PER_NS = CLOCK_GHZ
KAPPA = 0.5          # queueing shape: extra latency = base * KAPPA * rho/(1-rho)
OVERLOAD_KNEE = 0.95  # past this utilization the queueing curve continues linearly
CPI_BASE = 0.35      # non-memory cycles per instruction in synthesized runs

# Split of a cache-stall delta across levels (L1, L2, L3); L2-dominant.
CACHE_LEVEL_SPLIT = (0.15, 0.60, 0.25)

STORE_STALL_WEIGHT = 0.55
CACHE_STALL_WEIGHT = 0.12
OTHER_BACKEND_FRAC = 0.010
FRONTEND_FRAC = 0.005


@dataclass(frozen=True)
class DeviceProfile:
    """A memory tier's latency/bandwidth/tail parameters."""

    name: str
    base_latency_ns: float
    bandwidth_cap_gbs: float
    tail_prob: float = 0.0
    tail_scale_ns: float = 0.0
    jitter_sigma_ns: float = 0.0
    numa_hop_extra_ns: float = 0.0

    def __post_init__(self):
        if self.base_latency_ns <= 0:
            raise InvariantViolation("base_latency_ns must be > 0")
        if not 0 <= self.tail_prob < 0.1:
            raise InvariantViolation("tail_prob must be in [0, 0.1)")
        if self.bandwidth_cap_gbs <= 0:
            raise InvariantViolation("bandwidth_cap_gbs must be > 0")
        if self.tail_scale_ns < 0 or self.jitter_sigma_ns < 0 or self.numa_hop_extra_ns < 0:
            raise InvariantViolation("tail_scale/jitter/numa_hop must be >= 0")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "DeviceProfile":
        return cls(**json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class WorkloadProfile:
    """Knobs that shape a synthesized workload's counter signature."""

    name: str
    instructions: float
    demand_miss_rate: float        # LLC demand-read misses per kilo-instruction
    mlp_depth: float = 1.0         # mean outstanding demand reads
    prefetch_reliance: float = 0.0
    store_intensity: float = 0.0
    read_bandwidth_demand_gbs: float = 0.0

    def __post_init__(self):
        if self.instructions <= 0:
            raise InvariantViolation("instructions must be > 0")
        if self.demand_miss_rate < 0 or self.read_bandwidth_demand_gbs < 0:
            raise InvariantViolation("rates must be >= 0")
        if self.mlp_depth < 1:
            raise InvariantViolation("mlp_depth must be >= 1")
        for frac in (self.prefetch_reliance, self.store_intensity):
            if not 0 <= frac <= 1:
                raise InvariantViolation("fractions must be in [0, 1]")


def queueing_delay_ns(dev: DeviceProfile, load: float) -> float:
    """Load-dependent extra latency.

    Follows rho/(1-rho) up to the overload knee, then continues linearly
    (slope matched at the knee) so oversubscribed demand keeps inflating
    latency instead of hitting a pole.
    """
    if load <= 0:
        return 0.0
    if load <= OVERLOAD_KNEE:
        shape = load / (1.0 - load)
    else:
        knee = OVERLOAD_KNEE / (1.0 - OVERLOAD_KNEE)
        slope = 1.0 / (1.0 - OVERLOAD_KNEE) ** 2
        shape = knee + slope * (load - OVERLOAD_KNEE)
    return dev.base_latency_ns * KAPPA * shape


def utilization(demand_gbs: float, dev: DeviceProfile) -> float:
    """Offered-load utilization; may exceed 1 when demand outstrips the cap."""
    return demand_gbs / dev.bandwidth_cap_gbs


def mean_latency_ns(dev: DeviceProfile, load: float = 0.0) -> float:
    """Expected request latency at the given utilization (body + tail mass)."""
    if load < 0:
        raise LoadOutOfRange(f"load must be >= 0, got {load}")
    return (
        dev.base_latency_ns
        + dev.numa_hop_extra_ns
        + queueing_delay_ns(dev, load)
        + dev.tail_prob * dev.tail_scale_ns
    )


def latency_cycles(dev: DeviceProfile, load: float = 0.0) -> float:
    return mean_latency_ns(dev, load) * CYCLES_PER_NS


def sample_latencies(
    dev: DeviceProfile, n: int, load: float = 0.0, seed: int = 0
) -> np.ndarray:
    """Draw ``n`` request latencies (ns) at a fixed utilization.

    Sample = base + hop + queueing(load) + Gaussian jitter, floored at 0,
    plus an exponential excess with probability ``tail_prob``.
    Deterministic for a fixed seed.
    """
    if not 0 <= load < 1:
        raise LoadOutOfRange(f"load must be in [0, 1), got {load}")
    if n < 1:
        raise InvariantViolation("n must be >= 1")
    rng = np.random.default_rng(seed)
    body = (
        dev.base_latency_ns
        + dev.numa_hop_extra_ns
        + queueing_delay_ns(dev, load)
        + rng.normal(0.0, 1.0, size=n) * dev.jitter_sigma_ns
    )
    np.clip(body, 0.0, None, out=body)
    tail_hits = rng.uniform(size=n) < dev.tail_prob
    excess = rng.exponential(1.0, size=n) * dev.tail_scale_ns
    return body + tail_hits * excess


def sample_latencies_sharded(
    dev: DeviceProfile,
    n: int,
    load: float = 0.0,
    seed: int = 0,
    shards: int = 1,
    max_workers: int | None = None,
) -> np.ndarray:
    """Shard sampling across workers with per-shard derived seeds.

    Results depend on the sharding plan (seed, shard count) but not on the
    worker pool size, so a fixed plan is reproducible at any parallelism.
    """
    if shards < 1:
        raise InvariantViolation("shards must be >= 1")
    sizes = [n // shards + (1 if i < n % shards else 0) for i in range(shards)]
    seeds = [int(np.random.SeedSequence([seed, i]).generate_state(1)[0]) for i in range(shards)]
    jobs = [(sz, sd) for sz, sd in zip(sizes, seeds) if sz > 0]
    if max_workers is None or max_workers <= 1 or len(jobs) == 1:
        parts = [sample_latencies(dev, sz, load, sd) for sz, sd in jobs]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(lambda j: sample_latencies(dev, j[0], load, j[1]), jobs))
    return np.concatenate(parts)


def write_latency_samples_csv(samples: Sequence[float] | np.ndarray, path: str | Path) -> None:
    """Single-column CSV of latency samples in ns."""
    with Path(path).open("w") as fh:
        fh.write("latency_ns\n")
        for v in np.asarray(samples, dtype=float):
            fh.write(f"{float(v)!r}\n")


def latency_percentiles(
    samples: Sequence[float] | np.ndarray, qs: Sequence[float]
) -> dict[float, float]:
    """Nearest-rank percentiles (q in (0,1)); monotone in q by construction."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        from .errors import EmptyInput

        raise EmptyInput("no latency samples")
    for q in qs:
        if not 0 < q < 1:
            raise ValueError(f"quantile out of range (0,1): {q}")
    arr = np.sort(arr)
    return {q: float(arr[math.ceil(q * arr.size) - 1]) for q in qs}


# Device presets from the lab's reference platform table (latency ns /
# bandwidth GB/s at 2.1 GHz core clock).  Tail constants were tuned by
# bisection on tail_scale_ns so that p99.9 - p50 at one million unloaded
# samples lands on each device's measured spread.
PRESETS: dict[str, DeviceProfile] = {
    "local-emr": DeviceProfile(
        name="local-emr", base_latency_ns=111.0, bandwidth_cap_gbs=246.0,
        tail_prob=0.01, tail_scale_ns=19.5, jitter_sigma_ns=4.0,
    ),
    "numa": DeviceProfile(
        name="numa", base_latency_ns=193.0, bandwidth_cap_gbs=120.0,
        tail_prob=0.01, tail_scale_ns=26.5, jitter_sigma_ns=5.0,
    ),
    "cxl-a": DeviceProfile(
        name="cxl-a", base_latency_ns=214.0, bandwidth_cap_gbs=24.0,
        tail_prob=0.004, tail_scale_ns=80.2, jitter_sigma_ns=8.0,
    ),
    "cxl-b": DeviceProfile(
        name="cxl-b", base_latency_ns=271.0, bandwidth_cap_gbs=22.0,
        tail_prob=0.002, tail_scale_ns=226.7, jitter_sigma_ns=10.0,
    ),
    "cxl-c": DeviceProfile(
        name="cxl-c", base_latency_ns=394.0, bandwidth_cap_gbs=18.0,
        tail_prob=0.002, tail_scale_ns=227.1, jitter_sigma_ns=12.0,
    ),
    "cxl-d": DeviceProfile(
        name="cxl-d", base_latency_ns=239.0, bandwidth_cap_gbs=52.0,
        tail_prob=0.008, tail_scale_ns=36.0, jitter_sigma_ns=6.0,
    ),
}


def _local_counters(w: WorkloadProfile, dev: DeviceProfile) -> dict[str, float]:
    """Counter vector for a run entirely on ``dev`` (the local side)."""
    I = w.instructions
    n_miss = I * w.demand_miss_rate / 1000.0
    rho = utilization(w.read_bandwidth_demand_gbs, dev)
    lc = latency_cycles(dev, rho)
    lam = lc / w.mlp_depth
    if n_miss > 0 and lam < 1.0:
        raise InconsistentProfile(
            f"mlp_depth {w.mlp_depth} deeper than device latency ({lc:.1f} cycles)"
        )
    phi = w.prefetch_reliance
    s_dram = n_miss * lam
    s_store = w.store_intensity * I * STORE_STALL_WEIGHT
    cache_stall = phi * I * CACHE_STALL_WEIGHT
    s_l1, s_l2, s_l3 = (cache_stall * f for f in CACHE_LEVEL_SPLIT)
    other_backend = OTHER_BACKEND_FRAC * I
    frontend = FRONTEND_FRAC * I
    backend = s_store + s_l1 + s_l2 + s_l3 + s_dram + other_backend
    stall_total = backend + frontend
    total = I * CPI_BASE + stall_total

    l1_hits = 0.30 * I * (1.0 - 0.4 * phi)
    lfb = l1_hits * (0.03 + 0.45 * phi)
    l1pf_total = 0.05 * phi * I
    l1pf_l3_miss = l1pf_total * (0.35 + 0.30 * phi)
    l2pf_total = 0.03 * phi * I
    l2pf_dram_share = 0.40 + 0.20 * phi
    return {
        "total_cycles": total,
        "stall_cycles_total": stall_total,
        "backend_stall_cycles": backend,
        "mem_stall_cycles": s_dram + s_l2 + s_l3,
        "llc_miss_demand_stall_cycles": s_dram,
        "l1_demand_hits": l1_hits,
        "lfb_hits": lfb,
        "store_buffer_full_stall_cycles": s_store,
        "stall_l1": s_l1,
        "stall_l2": s_l2,
        "stall_l3": s_l3,
        "offcore_demand_requests": n_miss,
        "offcore_demand_occupancy": n_miss * lam,
        "l1_prefetch_l3_miss": l1pf_l3_miss,
        "l1_prefetch_total": l1pf_total,
        "l2_prefetch_l3_miss": l2pf_total * l2pf_dram_share,
        "l2_prefetch_l3_hit": l2pf_total * (1.0 - l2pf_dram_share),
        "instructions": I,
    }


def synthesize_runpair(
    w: WorkloadProfile,
    local: DeviceProfile,
    remote: DeviceProfile,
    params: ModelParams,
    seed: int = 0,
    consistency_noise: float = 0.0,
    dram_noise: tuple[float, float] = (0.0, 0.0),
    reference_gap_cycles: float | None = None,
    label: str | None = None,
) -> RunPair:
    """Generate a local/remote counter pair consistent with the model.

    The local snapshot encodes the workload's characteristics on ``local``;
    the remote snapshot adds per-source stall deltas planted from the model
    metrics (scaled by the latency gap between the two devices, so an
    identical device pair yields zero slowdown), with remote occupancy
    following the remote device's amortized latency.  The runtime delta
    equals the backend-stall delta up to ``consistency_noise`` (relative,
    uniform); ``dram_noise`` = (relative sigma, absolute sigma) perturbs
    only the planted DRAM component.
    """
    if (
        w.read_bandwidth_demand_gbs > local.bandwidth_cap_gbs
        and w.read_bandwidth_demand_gbs > remote.bandwidth_cap_gbs
    ):
        raise InconsistentProfile(
            "bandwidth demand exceeds both tiers' capacity; no queueing solution"
        )
    rng = np.random.default_rng(seed)
    eps = rng.uniform(-1.0, 1.0) * consistency_noise
    a_noise = rng.normal() * dram_noise[0]
    b_noise = rng.normal() * dram_noise[1]

    loc = _local_counters(w, local)
    local_snap = CounterSnapshot(**loc)
    c = loc["total_cycles"]

    rho_r = utilization(w.read_bandwidth_demand_gbs, remote)
    lc_loc = latency_cycles(local, utilization(w.read_bandwidth_demand_gbs, local))
    lc_rem = latency_cycles(remote, rho_r)
    lam_rem = lc_rem / w.mlp_depth
    n_miss = loc["offcore_demand_requests"]
    if n_miss > 0 and lam_rem < 1.0:
        raise InconsistentProfile("mlp_depth deeper than remote device latency")

    gap = lc_rem - lc_loc
    if reference_gap_cycles is None:
        gamma = 1.0 if gap != 0 else 0.0
    else:
        gamma = gap / reference_gap_cycles

    m_d = metric_dram(local_snap, params)
    m_c = metric_cache(local_snap)
    m_s = metric_store(local_snap)

    d_dram = c * (params.k1 * m_d * gamma * (1.0 + a_noise) + b_noise * gamma)
    d_dram = max(d_dram, -0.5 * loc["llc_miss_demand_stall_cycles"])
    d_cache = c * params.k2 * m_c * gamma
    d_store = c * params.k3 * m_s * gamma
    d_other = c * params.k4 * gamma
    if loc["store_buffer_full_stall_cycles"] + d_store < 0:
        raise InconsistentProfile("planted store delta drives counters negative")
    if OTHER_BACKEND_FRAC * w.instructions + d_other < 0:
        raise InconsistentProfile("planted intercept drives counters negative")

    dc1, dc2, dc3 = (d_cache * f for f in CACHE_LEVEL_SPLIT)
    rem = dict(loc)
    rem["llc_miss_demand_stall_cycles"] = loc["llc_miss_demand_stall_cycles"] + d_dram
    rem["store_buffer_full_stall_cycles"] = loc["store_buffer_full_stall_cycles"] + d_store
    rem["stall_l1"] = loc["stall_l1"] + dc1
    rem["stall_l2"] = loc["stall_l2"] + dc2
    rem["stall_l3"] = loc["stall_l3"] + dc3
    rem["mem_stall_cycles"] = (
        rem["llc_miss_demand_stall_cycles"] + rem["stall_l2"] + rem["stall_l3"]
    )
    d_total = d_dram + d_cache + d_store + d_other
    rem["backend_stall_cycles"] = loc["backend_stall_cycles"] + d_total
    rem["stall_cycles_total"] = loc["stall_cycles_total"] + d_total
    rem["total_cycles"] = loc["total_cycles"] + d_total
    rem["offcore_demand_occupancy"] = n_miss * lam_rem

    # Prefetcher shift on the slower tier: L2 prefetches that missed L3
    # migrate to L1-prefetch L3 misses one-for-one, surfacing as LFB hits.
    if gap > 0 and loc["l2_prefetch_l3_miss"] > 0:
        shift = min(0.3 * gap / max(lc_loc, 1.0), 0.9) * loc["l2_prefetch_l3_miss"]
        rem["l2_prefetch_l3_miss"] = loc["l2_prefetch_l3_miss"] - shift
        rem["l1_prefetch_l3_miss"] = loc["l1_prefetch_l3_miss"] + shift
        rem["l1_prefetch_total"] = loc["l1_prefetch_total"] + shift
        moved = min(shift, 0.5 * loc["l1_demand_hits"])
        rem["lfb_hits"] = loc["lfb_hits"] + moved
        rem["l1_demand_hits"] = loc["l1_demand_hits"] - moved

    remote_snap = CounterSnapshot(**rem)
    clock_hz = CLOCK_GHZ * 1e9
    t_local = c / clock_hz
    s_planted = d_total / c
    t_remote = t_local * (1.0 + s_planted * (1.0 + eps))
    if t_remote <= 0:
        raise InconsistentProfile("planted slowdown drives remote runtime negative")
    return RunPair(
        label=label if label is not None else w.name,
        local=local_snap,
        remote=remote_snap,
        local_runtime=t_local,
        remote_runtime=t_remote,
    )


def make_reference_params(
    local: DeviceProfile,
    remote: DeviceProfile,
    q: float = 0.45,
    k2_scale: float = 1.0,
    k3_scale: float = 0.8,
    k4: float = 0.0,
) -> ModelParams:
    """Anchor-consistent parameters for a device pair.

    The overlap correction is normalized to 1 at the no-overlap amortized
    latency of the local device (``p = (1-q) * lam1``), which is the same
    convention the sequential fit uses, and k1 is set to the relative
    latency gap so a no-overlap pointer chase slows down by roughly its
    LLC-stall fraction times the gap.
    """
    lam1 = latency_cycles(local, 0.0)
    k1 = latency_cycles(remote, 0.0) / lam1 - 1.0
    return ModelParams(
        k1=k1,
        k2=k2_scale * k1,
        k3=k3_scale * k1,
        k4=k4,
        p=(1.0 - q) * lam1,
        q=q,
        offcore_threshold=SENSITIVITY_MARGIN * lam1,
    )


def local_snapshot(w: WorkloadProfile, dev: DeviceProfile) -> CounterSnapshot:
    """Counter snapshot of ``w`` running entirely on ``dev``."""
    return CounterSnapshot(**_local_counters(w, dev))


# --- calibration-run and fixture-suite builders ---------------------------

CALIBRATION_MLP_DEPTHS = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)


def _calibration_workloads(
    mlp_depths: Sequence[float], instructions: float
) -> list[tuple[str, WorkloadProfile]]:
    wls = [
        (
            "pointer_chase",
            WorkloadProfile(
                name=f"ptr-chase-mlp{m:g}", instructions=instructions,
                demand_miss_rate=15.0, mlp_depth=m,
            ),
        )
        for m in mlp_depths
    ]
    # Store- and cache-revealing runs keep their DRAM term small so noise on
    # the overall slowdown does not swamp the k3/k2 divisions.
    wls.append(
        (
            "store_bound",
            WorkloadProfile(
                name="store-bound-a", instructions=instructions,
                demand_miss_rate=0.2, store_intensity=0.75,
            ),
        )
    )
    wls.append(
        (
            "store_bound",
            WorkloadProfile(
                name="store-bound-b", instructions=instructions,
                demand_miss_rate=0.1, store_intensity=0.55,
            ),
        )
    )
    wls.append(
        (
            "list_traversal",
            WorkloadProfile(
                name="list-traversal-a", instructions=instructions,
                demand_miss_rate=0.05, prefetch_reliance=1.0,
            ),
        )
    )
    wls.append(
        (
            "list_traversal",
            WorkloadProfile(
                name="list-traversal-b", instructions=instructions,
                demand_miss_rate=0.1, prefetch_reliance=0.85,
            ),
        )
    )
    wls.append(
        (
            "mixed",
            WorkloadProfile(
                name="mixed", instructions=instructions, demand_miss_rate=5.0,
                mlp_depth=2.0, prefetch_reliance=0.5, store_intensity=0.4,
            ),
        )
    )
    return wls


def make_calibration_runs(
    local: DeviceProfile,
    remote: DeviceProfile,
    params: ModelParams,
    seed: int = 0,
    mlp_depths: Sequence[float] = CALIBRATION_MLP_DEPTHS,
    noise: float = 0.0,
    instructions: float = 1e9,
):
    """Synthesize the microbenchmark run set the calibration fit consumes."""
    from .calibrate import CalibrationRun

    runs = []
    for i, (kind, w) in enumerate(_calibration_workloads(mlp_depths, instructions)):
        pair = synthesize_runpair(
            w, local, remote, params, seed=seed * 1_000_003 + i,
            consistency_noise=noise,
        )
        runs.append(CalibrationRun(kind=kind, pair=pair))
    return runs


def make_workload_suite(n: int, seed: int = 0) -> list[WorkloadProfile]:
    """A diverse mixed suite: DRAM-heavy, cache-heavy, store-heavy, and blends."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(
            WorkloadProfile(
                name=f"wl-{i:04d}",
                instructions=1e9,
                demand_miss_rate=float(rng.uniform(0.5, 18.0)),
                mlp_depth=float(rng.uniform(1.0, 8.0)),
                prefetch_reliance=float(rng.uniform(0.0, 0.9)),
                store_intensity=float(rng.uniform(0.0, 0.7)),
                read_bandwidth_demand_gbs=float(rng.uniform(0.0, 8.0)),
            )
        )
    return out


def make_bandwidth_bound_suite(
    n: int,
    seed: int = 0,
    local: DeviceProfile | None = None,
    demand_range: tuple[float, float] = (1.0, 1.45),
    mlp_range: tuple[float, float] = (3.0, 8.0),
    dmr_range: tuple[float, float] = (8.0, 20.0),
) -> list[WorkloadProfile]:
    """Streaming profiles whose demand pressures or exceeds the local tier.

    Demand is relative to the local cap; with enough queueing the amortized
    offcore latency blows past the sensitivity threshold and interleaving
    relief is on the table.  The defaults oversubscribe a 5:3-style
    platform; CXL-class remotes with little bandwidth headroom want a
    milder mix (lower demand, shallow overlap, sparse misses).
    """
    local = local or PRESETS["local-emr"]
    rng = np.random.default_rng(seed)
    cap = local.bandwidth_cap_gbs
    out = []
    for i in range(n):
        out.append(
            WorkloadProfile(
                name=f"bw-{i:04d}",
                instructions=1e9,
                demand_miss_rate=float(rng.uniform(*dmr_range)),
                mlp_depth=float(rng.uniform(*mlp_range)),
                prefetch_reliance=float(rng.uniform(0.1, 0.5)),
                store_intensity=float(rng.uniform(0.0, 0.2)),
                read_bandwidth_demand_gbs=float(rng.uniform(*demand_range)) * cap,
            )
        )
    return out


# Mix for the CXL-A-class interleaving fixture: mild local oversubscription
# with no overlap, so relief from the low-bandwidth remote tier lands in
# the single-digit-percent band.
CXLA_SUITE_KWARGS = dict(
    demand_range=(0.55, 0.80), mlp_range=(1.0, 1.0), dmr_range=(0.5, 0.9)
)


def make_latency_bound_suite(
    n: int, seed: int = 0, local: DeviceProfile | None = None
) -> list[WorkloadProfile]:
    """Pointer-chase-flavored profiles far from any bandwidth limit."""
    local = local or PRESETS["local-emr"]
    rng = np.random.default_rng(seed)
    cap = local.bandwidth_cap_gbs
    out = []
    for i in range(n):
        out.append(
            WorkloadProfile(
                name=f"lat-{i:04d}",
                instructions=1e9,
                demand_miss_rate=float(rng.uniform(2.0, 14.0)),
                mlp_depth=float(rng.uniform(1.0, 4.0)),
                prefetch_reliance=float(rng.uniform(0.0, 0.4)),
                store_intensity=float(rng.uniform(0.0, 0.3)),
                read_bandwidth_demand_gbs=float(rng.uniform(0.0, 0.25)) * cap,
            )
        )
    return out


def make_consistency_fixture(
    n: int,
    seed: int = 0,
    noise: float = 0.03,
    local: DeviceProfile | None = None,
    remote: DeviceProfile | None = None,
) -> list[RunPair]:
    """Run pairs whose runtime delta deviates from the stall delta by +-noise."""
    local = local or PRESETS["local-emr"]
    remote = remote or PRESETS["cxl-b"]
    params = make_reference_params(local, remote)
    pairs = []
    for i, w in enumerate(make_workload_suite(n, seed)):
        pairs.append(
            synthesize_runpair(
                w, local, remote, params, seed=seed * 7_919 + i,
                consistency_noise=noise,
            )
        )
    return pairs


# DRAM-component noise (relative sigma, absolute sigma) tuned so the fixed
# fixture suites land on the reference accuracy bands: the stable-tier
# analog sits in the low-to-mid 0.9s for within-5%, the noisier-tier analog
# degrades to the high-0.7s.
ACCURACY_NOISE = {
    "znuma": (0.11, 0.013),
    "cxlb": (0.15, 0.014),
}

# Heavier noise mix whose suite lands near the reference Pearson
# coefficient of ~0.965; used by correlation-anchor tests.
PEARSON_ANCHOR_NOISE = (0.19, 0.017)


def make_accuracy_suite(
    n: int,
    seed: int = 0,
    tier: str = "znuma",
    local: DeviceProfile | None = None,
    remote: DeviceProfile | None = None,
    noise: tuple[float, float] | None = None,
):
    """(predicted, measured) DRAM-slowdown points for the accuracy harness.

    Predictions come from the model on the local snapshot; measurements are
    the decomposed DRAM component of a pair planted with tier-specific
    noise (overridable via ``noise``).  80% of profiles are mild (small
    slowdown), 20% heavy.
    """
    from .breakdown import decompose
    from .model import metric_dram as _metric_dram

    if tier not in ACCURACY_NOISE:
        raise ValueError(f"unknown tier {tier!r}; expected one of {sorted(ACCURACY_NOISE)}")
    local = local or PRESETS["local-emr"]
    remote = remote or (PRESETS["numa"] if tier == "znuma" else PRESETS["cxl-b"])
    params = make_reference_params(local, remote)
    dram_noise = noise if noise is not None else ACCURACY_NOISE[tier]
    rng = np.random.default_rng(seed)
    points = []
    for i in range(n):
        heavy = rng.uniform() < 0.2
        w = WorkloadProfile(
            name=f"{tier}-{i:04d}",
            instructions=1e9,
            demand_miss_rate=float(rng.uniform(8.0, 20.0)) if heavy else float(rng.uniform(0.3, 3.5)),
            mlp_depth=float(rng.uniform(1.0, 3.0)) if heavy else float(rng.uniform(1.0, 8.0)),
            prefetch_reliance=float(rng.uniform(0.0, 0.4)),
            store_intensity=float(rng.uniform(0.0, 0.3)),
        )
        pair = synthesize_runpair(
            w, local, remote, params, seed=seed * 104_729 + i,
            dram_noise=dram_noise,
        )
        predicted = params.k1 * _metric_dram(pair.local, params)
        measured = decompose(pair).components["DRAM"]
        points.append((predicted, measured))
    return points
