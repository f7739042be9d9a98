"""Ensembles of independent trajectories and their outcome statistics."""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .geometry import OpticalGeometry
from .lattice import InitialState, LatticeSpec
from .trajectory import (
    Outcome,
    OutcomeKind,
    StopRule,
    classify_outcome,
    initial_conditional_state,
    simulate_batch,
)

CHUNK = 512


def child_seed(master_seed: int, index: int) -> int:
    """Seed of trajectory ``index``; replaying it reproduces that trajectory."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class HistogramRow:
    z: int
    count: float
    frequency: float
    p0: float
    folded_count: float | None = None
    folded_p0: float | None = None


@dataclass(frozen=True)
class EnsembleSummary:
    master_seed: int
    seeds: list[int]
    outcomes: list[Outcome]
    counts: NDArray[np.int64]
    stop_times: NDArray[np.float64]
    collapsed: NDArray[np.bool_]
    z_values: NDArray[np.int64]
    p0: NDArray[np.float64]
    histogram: list[HistogramRow]
    n_unresolved: int
    tv_distance: float
    collapse_time_mean: float
    collapse_time_median: float
    collapse_time_max: float

    @property
    def n_traj(self) -> int:
        return len(self.seeds)

    def outcome_labels(self) -> Counter:
        return Counter(o.label for o in self.outcomes)


def ensemble_run(
    lattice: LatticeSpec,
    geometry: OpticalGeometry,
    initial: InitialState,
    n_traj: int,
    master_seed: int,
    stop: StopRule,
    workers: int | None = None,
) -> EnsembleSummary:
    """Run ``n_traj`` trajectories with seeds ``child_seed(master_seed, i)``.

    Trajectories are split into fixed chunks and may run on a thread pool;
    results are gathered by index so the summary does not depend on scheduling.
    The total-variation distance compares outcome frequencies with the initial
    weight of each class of branches that photon counting cannot separate
    (single ``z`` at the maximum, ``{z, -z}`` at the minimum).
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    state = initial_conditional_state(lattice, geometry, initial)
    horizon = stop.horizon(geometry)
    seeds = [child_seed(master_seed, i) for i in range(n_traj)]
    chunks = [seeds[i : i + CHUNK] for i in range(0, n_traj, CHUNK)]

    def work(chunk: list[int]):
        return simulate_batch(state, chunk, horizon, stop.epsilon, stop.stop_on_collapse, record_jumps=False)

    workers = workers or min(4, os.cpu_count() or 1)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    counts = np.concatenate([r.counts for r in results])
    stop_times = np.concatenate([r.stop_time for r in results])
    collapsed = np.concatenate([r.collapsed for r in results])

    b = state.branches
    outcomes = []
    for m, t in zip(counts.tolist(), stop_times.tolist()):
        final = replace(state, counts_m=m, time_t=t)
        outcomes.append(classify_outcome(final.probabilities(), b, stop.epsilon))

    p0 = state.probabilities()
    z = state.z_values
    index = {int(v): i for i, v in enumerate(z)}
    signed = np.zeros(z.size)
    labels = b.intensity_classes()
    class_hits = np.zeros(labels.max() + 1)
    n_unresolved = 0
    for o in outcomes:
        if o.kind is OutcomeKind.UNRESOLVED:
            n_unresolved += 1
            continue
        share = 1.0 / len(o.z)
        for v in o.z:
            signed[index[v]] += share
        class_hits[labels[index[o.z[0]]]] += 1
    class_p0 = np.bincount(labels, weights=p0, minlength=class_hits.size)
    tv = 0.5 * (np.abs(class_hits / n_traj - class_p0).sum() + n_unresolved / n_traj)

    folded = _has_sign_pairs(z, labels)
    rows = []
    for i, v in enumerate(z.tolist()):
        fc = fp = None
        if folded and v >= 0:
            j = index.get(-v)
            fc = signed[i] + (signed[j] if j is not None and v > 0 else 0.0)
            fp = p0[i] + (p0[j] if j is not None and v > 0 else 0.0)
        rows.append(HistogramRow(v, float(signed[i]), float(signed[i] / n_traj), float(p0[i]), fc, fp))

    ct = stop_times[collapsed]
    return EnsembleSummary(
        master_seed=master_seed,
        seeds=seeds,
        outcomes=outcomes,
        counts=counts,
        stop_times=stop_times,
        collapsed=collapsed,
        z_values=z,
        p0=p0,
        histogram=rows,
        n_unresolved=n_unresolved,
        tv_distance=float(tv),
        collapse_time_mean=float(ct.mean()) if ct.size else math.nan,
        collapse_time_median=float(np.median(ct)) if ct.size else math.nan,
        collapse_time_max=float(ct.max()) if ct.size else math.nan,
    )


def _has_sign_pairs(z: NDArray[np.int64], labels: NDArray[np.int64]) -> bool:
    pos = {int(v): labels[i] for i, v in enumerate(z)}
    return any(v > 0 and -v in pos and pos[-v] == pos[v] for v in pos)
