"""Brute-force conditional state over every Fock configuration.

Each configuration ``q`` keeps a complex amplitude ``c_q alpha_q^m exp(Phi_q(t))``
with ``alpha_q`` evaluated from the full Lorentzian (both ``D10`` and ``D11``)
and ``Phi_q`` the exponent of the no-count evolution,

    Phi_q(t) = -|alpha_q|^2 kappa t + (A_q - A_q*) t / 2,
    A_q = eta alpha_q* - i U10 a0 D10_q alpha_q*.

Nothing here goes through the z-reduction, so it serves as ground truth for
the reduced engine on small lattices. Amplitudes are stored as complex logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .geometry import OpticalGeometry
from .lattice import (
    InitialState,
    LatticeSpec,
    SizeError,
    ZDistribution,
    configuration_count,
    z_grid,
)

ORACLE_MAX_ATOMS = 8
ORACLE_MAX_SITES = 6


class PhaseAmbiguityError(ValueError):
    """Configurations inside one z-sector do not share a common phase."""


@dataclass(frozen=True)
class FullConditionalState:
    configurations: NDArray[np.int64]
    log_amplitudes: NDArray[np.complex128]
    paired_alpha: NDArray[np.complex128]
    exponent_rate: NDArray[np.complex128]
    geometry: OpticalGeometry
    counts_m: int = 0
    time_t: float = 0.0

    def amplitudes(self) -> NDArray[np.complex128]:
        """Normalized amplitudes ``c_q(t)``."""
        la = self.log_amplitudes
        shift = np.max(la.real)
        amp = np.exp(la - shift)
        return amp / np.sqrt(np.sum(np.abs(amp) ** 2))

    def probabilities(self) -> NDArray[np.float64]:
        return np.abs(self.amplitudes()) ** 2

    def photon_flux(self) -> float:
        """Count rate ``2 kappa sum_q |alpha_q|^2 |c_q|^2``."""
        return 2 * self.geometry.kappa * float(np.dot(np.abs(self.paired_alpha) ** 2, self.probabilities()))


def oracle_initial(
    lattice: LatticeSpec,
    geometry: OpticalGeometry,
    initial: InitialState,
    max_atoms: int = ORACLE_MAX_ATOMS,
    max_sites: int = ORACLE_MAX_SITES,
) -> FullConditionalState:
    """Full state at ``m = 0, t = 0``; mixed drives are allowed here.

    Raises:
        SizeError: if ``N`` or ``M`` exceed the oracle caps.
    """
    if lattice.n_atoms > max_atoms or lattice.n_sites > max_sites:
        raise SizeError(
            f"oracle capped at N <= {max_atoms}, M <= {max_sites} "
            f"({configuration_count(lattice.n_atoms, lattice.n_sites)} configurations requested)"
        )
    geometry.validate_for(lattice)
    weights = initial.squared_amplitudes(lattice)
    configs = np.array(sorted(weights), dtype=np.int64)
    c0 = np.sqrt(np.array([weights[tuple(q)] for q in configs]))

    g = geometry
    d10 = configs @ g.mode_products_10
    d11 = configs @ g.mode_products_11
    alpha = (g.mirror_drive_eta - 1j * g.coupling_u10 * g.probe_amplitude_a0 * d10) / (
        1j * (g.coupling_u11 * d11 - g.detuning_dp) + g.kappa
    )
    a = g.mirror_drive_eta * np.conj(alpha) - 1j * g.coupling_u10 * g.probe_amplitude_a0 * d10 * np.conj(alpha)
    rate = -np.abs(alpha) ** 2 * g.kappa + (a - np.conj(a)) / 2
    with np.errstate(divide="ignore"):
        log_c0 = np.log(c0).astype(np.complex128)
    return FullConditionalState(configs, log_c0, alpha, rate, geometry)


def _advance(state: FullConditionalState, dt: float) -> FullConditionalState:
    return replace(
        state,
        log_amplitudes=state.log_amplitudes + state.exponent_rate * dt,
        time_t=state.time_t + dt,
    )


def _jump(state: FullConditionalState) -> FullConditionalState:
    with np.errstate(divide="ignore", invalid="ignore"):
        log_alpha = np.log(state.paired_alpha)
    return replace(state, log_amplitudes=state.log_amplitudes + log_alpha, counts_m=state.counts_m + 1)


def oracle_evolve(
    state: FullConditionalState, jump_times: Sequence[float], horizon: float
) -> FullConditionalState:
    """Evolve along a detection record up to ``horizon``.

    Segments of no-count evolution and jumps are applied in record order;
    jumps after ``horizon`` are ignored.
    """
    t = state.time_t
    for tj in jump_times:
        if tj > horizon:
            break
        if tj < t:
            raise ValueError("jump times must be non-decreasing and not precede the state time")
        state = _jump(_advance(state, tj - t))
        t = tj
    if horizon < t:
        raise ValueError("horizon precedes the current state time")
    return _advance(state, horizon - t)


def oracle_at(state: FullConditionalState, counts: int, time: float) -> FullConditionalState:
    """Closed form for ``counts`` detections by ``time``, independent of when they happened."""
    bright = state.paired_alpha != 0
    extra = np.zeros(bright.size, dtype=np.complex128)
    if counts:
        extra[bright] = counts * np.log(state.paired_alpha[bright])
        extra[~bright] = -np.inf
    return replace(
        state,
        log_amplitudes=state.log_amplitudes + extra + state.exponent_rate * time,
        counts_m=state.counts_m + counts,
        time_t=state.time_t + time,
    )


def z_marginal(state: FullConditionalState, weights: Sequence[int]) -> ZDistribution:
    """Sum the normalized squared amplitudes of configurations sharing ``z = sum_j w_j q_j``."""
    w = np.asarray(weights, dtype=np.int64)
    n_atoms = int(state.configurations[0].sum())
    z_min, step, n_points = z_grid(w.tolist(), n_atoms)
    zq = state.configurations @ w
    mass = np.zeros(n_points)
    np.add.at(mass, (zq - z_min) // step, state.probabilities())
    with np.errstate(divide="ignore"):
        log_w = np.log(mass)
    return ZDistribution(z_min + step * np.arange(n_points), log_w, step)


def _sector_phase(amp: NDArray[np.complex128], tol: float) -> float:
    ref = amp[np.argmax(np.abs(amp))]
    spread = np.abs(np.angle(amp * np.conj(ref)))
    if np.any(spread > tol):
        raise PhaseAmbiguityError(f"phase spread {spread.max():.3e} rad inside one z-sector")
    return float(np.angle(ref))


def superposition_phase(
    state: FullConditionalState,
    z_plus: int,
    z_minus: int,
    weights: Sequence[int],
    tol: float = 1e-9,
) -> float:
    """Relative phase in ``[0, 2 pi)`` of the ``z_plus`` sector against the ``z_minus`` sector."""
    zq = state.configurations @ np.asarray(weights, dtype=np.int64)
    amp = state.amplitudes()
    populated = np.abs(amp) > 0
    plus = amp[(zq == z_plus) & populated]
    minus = amp[(zq == z_minus) & populated]
    if plus.size == 0 or minus.size == 0:
        raise ValueError("both z-sectors need non-zero weight")
    diff = _sector_phase(plus, tol) - _sector_phase(minus, tol)
    return float(np.mod(diff, 2 * np.pi))


def fixed_dt_sampler(
    state: FullConditionalState,
    dt: float,
    seed: int,
    horizon: float,
    max_jumps: int | None = None,
    block: int = 1024,
) -> NDArray[np.float64]:
    """Jump times from the time-stepped counting procedure.

    At every step the count probability ``flux * dt`` is compared with a
    uniform draw; a count is registered at the end of the step. Only used to
    cross-check the exact waiting-time sampler.

    Raises:
        ValueError: if ``dt`` times the largest populated decay rate exceeds 0.1.
    """
    populated = state.probabilities() > 0
    max_rate = 2 * state.geometry.kappa * float(np.max(np.abs(state.paired_alpha[populated]) ** 2))
    if dt * max_rate > 0.1:
        raise ValueError(f"dt={dt} too coarse: dt * max decay rate = {dt * max_rate:.3g} > 0.1")
    rng = np.random.Generator(np.random.PCG64(seed))
    kappa = state.geometry.kappa
    intensity = np.abs(state.paired_alpha) ** 2
    decay = 2 * intensity * kappa
    jumps: list[float] = []
    n_steps = int(math.floor(horizon / dt + 1e-9))
    step = 0
    while step < n_steps and (max_jumps is None or len(jumps) < max_jumps):
        p = state.probabilities()
        k = np.arange(min(block, n_steps - step))
        # weights a few steps ahead of the last count, no count in between
        w = p[None, :] * np.exp(-np.outer(k * dt, decay))
        flux = 2 * kappa * (w @ intensity) / w.sum(axis=1)
        u = rng.random(k.size)
        hit = np.flatnonzero(u < flux * dt)
        if hit.size == 0:
            state = _advance(state, k.size * dt)
            step += k.size
            continue
        first = int(hit[0])
        state = _jump(_advance(state, (first + 1) * dt))
        step += first + 1
        jumps.append(step * dt)
    return np.array(jumps)


@dataclass(frozen=True)
class CheckRow:
    record: int
    time: float
    counts: int
    max_abs_diff: float


def oracle_check(
    lattice: LatticeSpec,
    geometry: OpticalGeometry,
    initial: InitialState,
    n_records: int,
    n_checkpoints: int,
    seed: int,
    horizon: float,
) -> list[CheckRow]:
    """Compare z-marginals of the oracle and the reduced engine along engine-drawn records.

    Checkpoint times are drawn uniformly on ``[0, horizon]`` from ``seed``.
    """
    from .ensemble import child_seed
    from .geometry import reduction_weights
    from .trajectory import initial_conditional_state, simulate_batch, state_at

    engine = initial_conditional_state(lattice, geometry, initial)
    full = oracle_initial(lattice, geometry, initial)
    weights = reduction_weights(geometry).weights
    seeds = [child_seed(seed, i) for i in range(n_records)]
    records = simulate_batch(engine, seeds, horizon).jump_times
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = []
    for i, jt in enumerate(records):  # type: ignore[arg-type]
        for tc in np.sort(rng.uniform(0.0, horizon, n_checkpoints)):
            reduced = state_at(engine, jt, tc)
            exact = z_marginal(oracle_evolve(full, jt, tc), weights)
            diff = float(np.max(np.abs(reduced.probabilities() - exact.probabilities())))
            rows.append(CheckRow(i, float(tc), reduced.counts_m, diff))
    return rows
