"""Photon-counting trajectories of the reduced conditional distribution p(z, m, t).

Because every branch amplitude is stationary, the conditional log-weight of
branch ``z`` after ``m`` counts at time ``t`` is

    log p0(z) + m log|alpha_z|^2 - 2 |alpha_z|^2 kappa t      (+ const)

whatever the detection times were. :class:`ConditionalState` stores only
``(p0, m, t)`` and derives weights and phases from that expression, so no
rounding accumulates along a record and snapshots can be taken after the
fact from the jump times alone.

Waiting times are sampled by inverting the no-count survival probability
``S(dt) = sum_z p(z) exp(-decay_z dt)``. One compiled kernel serves both
single trajectories and ensembles, and each trajectory owns its uniform
stream, so a trajectory gives bit-identical results whether simulated alone
or inside a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .geometry import BranchSet, OpticalGeometry, Scenario, branch_rates, reduction_weights, tau_rate
from . import _kernel
from .lattice import InitialState, LatticeSpec, ZDistribution, initial_z_distribution

DEFAULT_EPSILON = 1e-3
DEFAULT_CADENCE = 64
UNIFORM_BLOCK = 256


class ImpossibleJumpError(RuntimeError):
    """A count was requested from a state whose every populated branch is dark."""


# ---------------------------------------------------------------------------
# state


@dataclass(frozen=True)
class ConditionalState:
    branches: BranchSet
    log_p0: NDArray[np.float64]
    step: int
    counts_m: int = 0
    time_t: float = 0.0

    @property
    def z_values(self) -> NDArray[np.int64]:
        return self.branches.z_values

    @property
    def log_weights(self) -> NDArray[np.float64]:
        """Normalized log-weights, computed by the same routine the simulation kernel uses."""
        li_f, dark, rate = _kernel_inputs(self.branches)
        out = np.empty(self.log_p0.size)
        _kernel.normalized_log_weights(self.log_p0, li_f, dark, rate, self.counts_m, self.time_t, out)
        return out

    @property
    def distribution(self) -> ZDistribution:
        return ZDistribution(self.z_values, self.log_weights, self.step)

    def probabilities(self) -> NDArray[np.float64]:
        return np.exp(self.log_weights)

    @property
    def accumulated_phase(self) -> NDArray[np.float64]:
        """Per-branch phase ``m arg(alpha_z) + phase_rate_z t`` reduced to ``[0, 2 pi)``."""
        b = self.branches
        ph = self.counts_m * np.angle(b.alpha) + b.phase_rate * self.time_t
        return np.mod(ph, 2 * np.pi)


def initial_conditional_state(
    lattice: LatticeSpec, geometry: OpticalGeometry, initial: InitialState
) -> ConditionalState:
    geometry.validate_for(lattice)
    red = reduction_weights(geometry)
    p0 = initial_z_distribution(lattice, initial, red.weights)
    branches = branch_rates(p0.z_values, geometry)
    return ConditionalState(branches, p0.normalized().log_weights, p0.step)


def advance_no_count(state: ConditionalState, dt: float) -> ConditionalState:
    """No-count evolution for ``dt``; normalization is deferred to readout."""
    if not dt >= 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return state
    return replace(state, time_t=state.time_t + dt)


def apply_jump(state: ConditionalState) -> ConditionalState:
    """Apply one photodetection: every branch is multiplied by its ``alpha_z``."""
    p = state.probabilities()
    if not np.any((p > 0) & (state.branches.decay_rate > 0)):
        raise ImpossibleJumpError("no populated branch emits light; a count is impossible")
    return replace(state, counts_m=state.counts_m + 1)


def conditioned_photon_number(state: ConditionalState) -> float:
    """Cavity photon number on this trajectory, ``sum_z |alpha_z|^2 p(z)``."""
    return float(np.dot(state.branches.intensity, state.probabilities()))


def sample_waiting_time(state: ConditionalState, r: float) -> float:
    """Time until the next count given a uniform draw ``r`` in (0, 1).

    Solves ``S(dt) = r``. Returns ``math.inf`` (no further count) when ``r``
    is at or below ``S(inf)``, the population of dark branches.
    """
    if not 0 < r < 1:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    dt = _kernel.solve_waiting_time(state.log_weights, state.branches.decay_rate, math.log(r))
    if math.isnan(dt):
        raise RuntimeError("waiting-time solve did not converge")
    return float(dt)


# ---------------------------------------------------------------------------
# kernel inputs


def _kernel_inputs(branches: BranchSet) -> tuple[NDArray, NDArray, NDArray]:
    """``(log|alpha|^2 with dark entries zeroed, dark mask, decay rates)``."""
    li = branches.log_intensity
    dark = ~np.isfinite(li)
    li_f = np.where(dark, 0.0, li)
    return li_f, dark, np.ascontiguousarray(branches.decay_rate, dtype=np.float64)


# ---------------------------------------------------------------------------
# outcomes


class OutcomeKind(str, Enum):
    SINGLET = "singlet"
    DOUBLET = "doublet"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class Outcome:
    """Collapse classification; ``ambiguous`` marks two distinguishable surviving peaks."""

    kind: OutcomeKind
    z: tuple[int, ...] = ()
    ambiguous: bool = False

    @property
    def label(self) -> str:
        if not self.z:
            return self.kind.value
        return f"{self.kind.value}({','.join(str(v) for v in self.z)})"


def _intensity_pairs(branches: BranchSet) -> list[tuple[int, int]]:
    labels = branches.intensity_classes()
    pairs = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        for a in range(members.size):
            for b in range(a + 1, members.size):
                pairs.append((int(members[a]), int(members[b])))
    return pairs


def classify_outcome(
    probabilities: NDArray[np.float64], branches: BranchSet, epsilon: float = DEFAULT_EPSILON
) -> Outcome:
    """Singlet if one ``z`` holds more than ``1 - eps``; doublet if two ``z`` of equal ``|alpha|`` do."""
    p = np.asarray(probabilities)
    z = branches.z_values
    top = int(np.argmax(p))
    if p[top] > 1 - epsilon:
        return Outcome(OutcomeKind.SINGLET, (int(z[top]),))
    for i, j in _intensity_pairs(branches):
        if p[i] + p[j] > 1 - epsilon and p[i] > epsilon / 2 and p[j] > epsilon / 2:
            return Outcome(OutcomeKind.DOUBLET, (int(z[i]), int(z[j])))
    a, b = np.argsort(p)[-2:][::-1] if p.size > 1 else (top, top)
    if a != b and p[a] + p[b] > 1 - epsilon and p[b] > epsilon / 2:
        return Outcome(OutcomeKind.UNRESOLVED, tuple(sorted((int(z[a]), int(z[b])))), ambiguous=True)
    return Outcome(OutcomeKind.UNRESOLVED)


# ---------------------------------------------------------------------------
# width


def fwhm_from_samples(z: Sequence[float], p: Sequence[float]) -> float:
    """Full width at half maximum of the piecewise-linear interpolant of ``p(z)``.

    The peak is the first maximal sample. Outside the grid the interpolant
    falls to zero one grid spacing beyond the edge, so a one-point delta has
    width equal to the spacing. Only the peak's own lobe is measured.
    """
    z = np.asarray(z, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if z.size == 0:
        raise ValueError("empty distribution")
    if z.size > 1:
        step_l, step_r = z[1] - z[0], z[-1] - z[-2]
    else:
        step_l = step_r = 1.0
    zz = np.concatenate(([z[0] - step_l], z, [z[-1] + step_r]))
    pp = np.concatenate(([0.0], p, [0.0]))
    k = int(np.argmax(pp))
    half = pp[k] / 2
    i = k
    while pp[i - 1] >= half:
        i -= 1
    left = zz[i - 1] + (half - pp[i - 1]) / (pp[i] - pp[i - 1]) * (zz[i] - zz[i - 1])
    j = k
    while pp[j + 1] >= half:
        j += 1
    right = zz[j] + (pp[j] - half) / (pp[j] - pp[j + 1]) * (zz[j + 1] - zz[j])
    return float(right - left)


def fwhm(distribution: ZDistribution) -> float:
    return fwhm_from_samples(distribution.z_values, distribution.probabilities())


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class StopRule:
    """When to stop: a horizon (in ``1/kappa`` or in ``tau``) and optional collapse.

    ``epsilon`` is the collapse threshold used for classification; with
    ``stop_on_collapse`` the run also ends at the first time the state is
    classified as collapsed.
    """

    max_time: float | None = None
    max_tau: float | None = None
    epsilon: float = DEFAULT_EPSILON
    stop_on_collapse: bool = False

    def __post_init__(self) -> None:
        if self.max_time is None and self.max_tau is None:
            raise ValueError("stop rule needs max_time or max_tau")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    def horizon(self, geometry: OpticalGeometry) -> float:
        times = []
        if self.max_time is not None:
            times.append(float(self.max_time))
        if self.max_tau is not None:
            rate = tau_rate(geometry)
            if rate is None:
                raise ValueError("max_tau is only defined for transverse probing")
            times.append(float(self.max_tau) / rate)
        return min(times)


@dataclass(frozen=True)
class Snapshot:
    time: float
    tau: float
    m: int
    probabilities: NDArray[np.float64]
    mean_z: float
    fwhm: float
    photon_number: float
    outcome: Outcome


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    z_values: NDArray[np.int64]
    jump_times: NDArray[np.float64]
    snapshots: list[Snapshot]
    outcome: Outcome
    stop_time: float
    tau_rate: float | None
    photon_scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    @property
    def counts(self) -> int:
        return int(self.jump_times.size)


def uniform_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _draw_block(rng: np.random.Generator) -> NDArray[np.float64]:
    # shift onto the open interval (0, 1); random() returns multiples of 2**-53
    return rng.random(UNIFORM_BLOCK) + 2.0**-54


@dataclass
class BatchResult:
    counts: NDArray[np.int64]
    stop_time: NDArray[np.float64]
    collapsed: NDArray[np.bool_]
    jump_times: list[NDArray[np.float64]] | None


def simulate_batch(
    state: ConditionalState,
    seeds: Sequence[int],
    horizon: float,
    epsilon: float = DEFAULT_EPSILON,
    stop_on_collapse: bool = False,
    record_jumps: bool = True,
) -> BatchResult:
    """Simulate one trajectory per seed, continuing from ``state``.

    Times are on the state's own clock: the run ends at ``state.time_t +
    horizon`` and returned jump and stop times are absolute (for an initial
    state the clock starts at zero). Each trajectory draws its waiting times
    from its own uniform stream in blocks, so trajectories are independent of
    one another and of batching.
    """
    b = state.branches
    log_p0 = np.ascontiguousarray(state.log_p0, dtype=np.float64)
    li_f, dark, rate = _kernel_inputs(b)
    end = state.time_t + horizon
    pairs = np.array(_intensity_pairs(b), dtype=np.int64).reshape(-1, 2)
    pair_i, pair_j = pairs[:, 0].copy(), pairs[:, 1].copy()

    n = len(seeds)
    counts = np.zeros(n, dtype=np.int64)
    stop = np.zeros(n)
    collapsed = np.zeros(n, dtype=bool)
    jumps: list[NDArray[np.float64]] | None = [] if record_jumps else None
    buf = np.empty(UNIFORM_BLOCK)
    for i, seed in enumerate(seeds):
        rng = uniform_stream(int(seed))
        m, t = state.counts_m, state.time_t
        pieces = []
        while True:
            status, m, t, nw = _kernel.run_segment(
                log_p0, li_f, dark, rate, pair_i, pair_j, epsilon, stop_on_collapse,
                end, m, t, _draw_block(rng), buf,
            )
            if record_jumps and nw:
                pieces.append(buf[:nw].copy())
            if status == _kernel.NEEDS_DRAWS:
                continue
            if status == _kernel.NO_CONVERGENCE:
                raise RuntimeError(f"waiting-time solve did not converge (seed {seed})")
            break
        counts[i] = m - state.counts_m
        collapsed[i] = status == _kernel.COLLAPSED
        stop[i] = t if collapsed[i] else end
        if jumps is not None:
            jumps.append(np.concatenate(pieces) if pieces else np.zeros(0))
    return BatchResult(counts, stop, collapsed, jumps)


def state_at(state: ConditionalState, jump_times: NDArray[np.float64], time: float) -> ConditionalState:
    """Conditional state at ``time`` along a record of jump times (a jump at ``time`` counts)."""
    m = int(np.searchsorted(jump_times, time, side="right"))
    return replace(state, counts_m=state.counts_m + m, time_t=state.time_t + time)


def snapshot_times(
    jump_times: NDArray[np.float64],
    stop_time: float,
    explicit: Sequence[float] = (),
    cadence: int = DEFAULT_CADENCE,
) -> NDArray[np.float64]:
    """``0``, ``stop_time``, the explicit times and ``cadence`` geometric points from the first count."""
    pts = [0.0, stop_time, *[x for x in explicit if 0 <= x <= stop_time]]
    if cadence and jump_times.size and stop_time > jump_times[0]:
        pts.extend(np.geomspace(jump_times[0], stop_time, cadence).tolist())
    return np.unique(np.array(pts, dtype=np.float64))


def take_snapshot(state: ConditionalState, rate_tau: float | None, epsilon: float) -> Snapshot:
    p = state.probabilities()
    z = state.z_values
    return Snapshot(
        time=state.time_t,
        tau=state.time_t * rate_tau if rate_tau is not None else math.nan,
        m=state.counts_m,
        probabilities=p,
        mean_z=float(np.dot(z, p)),
        fwhm=fwhm_from_samples(z, p),
        photon_number=float(np.dot(state.branches.intensity, p)),
        outcome=classify_outcome(p, state.branches, epsilon),
    )


def photon_scale(geometry: OpticalGeometry) -> float:
    """Reference photon number: ``|C|^2`` for transverse probing, ``|eta/kappa|^2`` for mirror probing."""
    rate = tau_rate(geometry)
    if rate is not None:
        return rate / (2 * geometry.kappa)
    return abs(geometry.mirror_drive_eta / geometry.kappa) ** 2


def run_trajectory(
    lattice: LatticeSpec,
    geometry: OpticalGeometry,
    initial: InitialState,
    seed: int,
    stop: StopRule,
    snapshot_at: Sequence[float] = (),
    cadence: int = DEFAULT_CADENCE,
    snapshot_in_tau: bool | None = None,
) -> TrajectoryRecord:
    """Simulate one photon-counting record and snapshot the conditional distribution.

    ``snapshot_at`` lists extra snapshot times, in ``tau`` for transverse
    probing and in ``1/kappa`` otherwise (override with ``snapshot_in_tau``).
    """
    state = initial_conditional_state(lattice, geometry, initial)
    horizon = stop.horizon(geometry)
    res = simulate_batch(state, [seed], horizon, stop.epsilon, stop.stop_on_collapse)
    jt = res.jump_times[0]  # type: ignore[index]
    stop_time = float(res.stop_time[0])
    rate = tau_rate(geometry)
    in_tau = rate is not None if snapshot_in_tau is None else snapshot_in_tau
    if in_tau and rate is None:
        raise ValueError("tau snapshots need transverse probing")
    explicit = [x / rate for x in snapshot_at] if in_tau else list(snapshot_at)  # type: ignore[operator]
    if np.count_nonzero(state.probabilities() > 0) == 1:
        # a single populated branch never changes; one snapshot says it all
        times = np.zeros(1)
    else:
        times = snapshot_times(jt, stop_time, explicit, cadence)
    snaps = [take_snapshot(state_at(state, jt, ts), rate, stop.epsilon) for ts in times]
    return TrajectoryRecord(
        seed=seed,
        z_values=state.z_values,
        jump_times=jt,
        snapshots=snaps,
        outcome=snaps[-1].outcome,
        stop_time=stop_time,
        tau_rate=rate,
        photon_scale=photon_scale(geometry),
    )


def photon_number_series(
    state: ConditionalState, jump_times: NDArray[np.float64], times: Sequence[float]
) -> NDArray[np.float64]:
    return np.array([conditioned_photon_number(state_at(state, jump_times, s)) for s in times])
