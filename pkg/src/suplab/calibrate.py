"""Model-parameter fitting from microbenchmark-style calibration runs.

The sequential recipe uses three run kinds:

* ``pointer_chase`` - zero cache/store slowdown; two or more runs at
  distinct MLP depths identify the overlap correction (p, q) and k1.
* ``store_bound``   - adds the store term; identifies k3.
* ``list_traversal`` - prefetch-fed; identifies k2.
* ``mixed``         - optional; identifies the intercept k4.

The triple (k1, p, q) carries a scale redundancy (scaling all three by a
common factor leaves every prediction unchanged), so the fit pins the
scale with a no-overlap anchor: the correction factor is defined to be
exactly 1 at the largest pointer-chase amortized latency (the MLP=1 run,
where nothing overlaps and the raw stall fraction needs no correction).
The sensitivity threshold is placed a fixed margin above that anchor.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .breakdown import measure_slowdown
from .counters import RunPair, amortized_offcore_latency, read_run_pairs, write_run_pairs
from .errors import (
    DegenerateMetric,
    EmptyInput,
    InsufficientMlpSpread,
    InvariantViolation,
    MissingKind,
    RankDeficient,
)
from .model import (
    SENSITIVITY_MARGIN,
    ModelParams,
    metric_cache,
    metric_dram,
    metric_store,
)

RUN_KINDS = ("pointer_chase", "store_bound", "list_traversal", "mixed")

_PURE_DRAM_TOL = 1e-3
_METRIC_EPS = 1e-12


@dataclass(frozen=True)
class CalibrationRun:
    kind: str
    pair: RunPair

    def __post_init__(self):
        if self.kind not in RUN_KINDS:
            raise InvariantViolation(f"unknown calibration kind: {self.kind!r}")
        if self.kind == "pointer_chase":
            if metric_cache(self.pair.local) > _PURE_DRAM_TOL:
                raise InvariantViolation("pointer_chase run shows cache traffic")
            if metric_store(self.pair.local) > _PURE_DRAM_TOL:
                raise InvariantViolation("pointer_chase run shows store stalls")


def _by_kind(runs: Sequence[CalibrationRun]) -> dict[str, list[CalibrationRun]]:
    groups: dict[str, list[CalibrationRun]] = {k: [] for k in RUN_KINDS}
    for r in runs:
        groups[r.kind].append(r)
    # Deterministic processing order regardless of input permutation.
    for k in groups:
        groups[k].sort(key=lambda r: (amortized_offcore_latency(r.pair.local), r.pair.label))
    return groups


def fit_sequential(runs: Sequence[CalibrationRun]) -> ModelParams:
    """Derive ModelParams step by step from the three microbenchmark kinds."""
    groups = _by_kind(runs)
    for kind in ("pointer_chase", "store_bound", "list_traversal"):
        if not groups[kind]:
            raise MissingKind(kind)

    # Overlap correction from pointer-chase runs.  With S = k1*b/(p/lam+q)
    # and no cache/store term, b/S is linear in 1/lam with slope p/k1 and
    # intercept q/k1; the anchor (correction factor 1 at the largest lam)
    # then fixes the absolute scale.
    lams, xs, ys = [], [], []
    for r in groups["pointer_chase"]:
        s = measure_slowdown(r.pair)
        b = r.pair.local.llc_miss_demand_stall_cycles / r.pair.local.total_cycles
        if abs(s) < _METRIC_EPS or b < _METRIC_EPS:
            raise DegenerateMetric(
                f"pointer_chase run {r.pair.label!r} has no usable DRAM signal"
            )
        lam = amortized_offcore_latency(r.pair.local)
        lams.append(lam)
        xs.append(1.0 / lam)
        ys.append(b / s)
    if len(lams) < 2 or (max(lams) - min(lams)) / max(lams) < 1e-9:
        raise InsufficientMlpSpread(
            "need pointer_chase runs at >= 2 distinct amortized latencies to fit p, q"
        )
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    denom = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / denom          # p / k1
    intercept = (sy - slope * sx) / n            # q / k1
    lam_anchor = max(lams)
    scale = slope / lam_anchor + intercept       # = 1 / k1 under the anchor
    if scale <= 0 or intercept <= 0:
        raise DegenerateMetric("pointer_chase fit yields a non-positive correction")
    k1 = 1.0 / scale
    p = max(k1 * slope, 0.0)
    q = k1 * intercept
    threshold = SENSITIVITY_MARGIN * lam_anchor
    probe = ModelParams(k1=k1, k2=1.0, k3=1.0, k4=0.0, p=p, q=q, offcore_threshold=threshold)

    def _step(kind: str, residual) -> float:
        vals = []
        for r in groups[kind]:
            s = measure_slowdown(r.pair)
            m_d = metric_dram(r.pair.local, probe)
            vals.append(residual(r, s, m_d))
        return sum(vals) / len(vals)

    def _k3(r, s, m_d):
        m_s = metric_store(r.pair.local)
        if m_s < _METRIC_EPS:
            raise DegenerateMetric(f"store_bound run {r.pair.label!r} has zero store metric")
        return (s - k1 * m_d) / m_s

    k3 = _step("store_bound", _k3)

    def _k2(r, s, m_d):
        m_c = metric_cache(r.pair.local)
        if m_c < _METRIC_EPS:
            raise DegenerateMetric(f"list_traversal run {r.pair.label!r} has zero cache metric")
        return (s - k1 * m_d - k3 * metric_store(r.pair.local)) / m_c

    k2 = _step("list_traversal", _k2)

    k4 = 0.0
    if groups["mixed"]:
        k4 = _step(
            "mixed",
            lambda r, s, m_d: s
            - k1 * m_d
            - k2 * metric_cache(r.pair.local)
            - k3 * metric_store(r.pair.local),
        )

    return ModelParams(k1=k1, k2=k2, k3=k3, k4=k4, p=p, q=q, offcore_threshold=threshold)


def _design(runs: Sequence[CalibrationRun], params: ModelParams):
    ordered = sorted(runs, key=lambda r: (r.pair.label, r.kind))
    rows = []
    y = []
    for r in ordered:
        rows.append(
            [
                metric_dram(r.pair.local, params),
                metric_cache(r.pair.local),
                metric_store(r.pair.local),
                1.0,
            ]
        )
        y.append(measure_slowdown(r.pair))
    return np.asarray(rows, dtype=float), np.asarray(y, dtype=float)


_COLUMN_NAMES = ("m_dram", "m_cache", "m_store", "intercept")


def fit_least_squares(runs: Sequence[CalibrationRun], init: ModelParams) -> ModelParams:
    """Refit (k1..k4) by ordinary least squares, holding p, q from ``init``."""
    if len(runs) < 5:
        raise EmptyInput("least-squares refit needs at least 5 runs")
    if len({r.kind for r in runs}) < 2:
        raise InvariantViolation("least-squares refit needs runs spanning >= 2 kinds")
    X, y = _design(runs, init)
    norms = np.linalg.norm(X, axis=0)
    rank = np.linalg.matrix_rank(X)
    if rank < 4:
        dead = [name for name, nm in zip(_COLUMN_NAMES, norms) if nm < 1e-12]
        if dead:
            raise RankDeficient(dead[0])
        # All columns populated yet collinear: blame the weakest singular direction.
        _, _, vt = np.linalg.svd(X, full_matrices=False)
        raise RankDeficient(_COLUMN_NAMES[int(np.argmax(np.abs(vt[-1])))])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    k1, k2, k3, k4 = (float(v) for v in coef)
    return ModelParams(
        k1=k1, k2=k2, k3=k3, k4=k4,
        p=init.p, q=init.q, offcore_threshold=init.offcore_threshold,
    )


def residual_sse(runs: Sequence[CalibrationRun], params: ModelParams) -> float:
    """Sum of squared prediction errors of ``params`` over a run set."""
    X, y = _design(runs, params)
    coef = np.array([params.k1, params.k2, params.k3, params.k4])
    resid = X @ coef - y
    return float(resid @ resid)


def write_calibration_csv(runs: Sequence[CalibrationRun], path: str | Path) -> None:
    write_run_pairs([r.pair for r in runs], path, extra={"kind": [r.kind for r in runs]})


def read_calibration_csv(path: str | Path) -> list[CalibrationRun]:
    pairs, extras = read_run_pairs(path, extra_columns=("kind",))
    return [CalibrationRun(kind=k, pair=p) for k, p in zip(extras["kind"], pairs)]
