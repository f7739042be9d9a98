"""Lattice configurations, initial states and their reduction to z-distributions.

A configuration ``q = (q_1, ..., q_M)`` places ``N`` bosons on ``M`` sites.
Any linear statistic ``z = sum_j w_j q_j`` with integer weights induces a
distribution ``p0(z)`` over a uniformly spaced integer grid. Probability mass
is kept as natural logs throughout; unreachable grid points carry ``-inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Iterator, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

DEFAULT_ENUMERATION_CAP = 2_000_000

FockConfiguration = tuple[int, ...]


class SizeError(ValueError):
    """Raised when an enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class LatticeSpec:
    """``n_atoms`` bosons on ``n_sites`` sites, of which the masked ones are illuminated."""

    n_atoms: int
    n_sites: int
    illuminated: tuple[bool, ...]

    def __post_init__(self) -> None:
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be >= 1, got {self.n_sites}")
        mask = tuple(bool(b) for b in self.illuminated)
        object.__setattr__(self, "illuminated", mask)
        if len(mask) != self.n_sites:
            raise ValueError(
                f"illuminated mask has length {len(mask)}, expected n_sites={self.n_sites}"
            )
        if not 1 <= sum(mask) <= self.n_sites:
            raise ValueError("illuminated mask must select at least one site")

    @property
    def n_illuminated(self) -> int:
        return sum(self.illuminated)

    @property
    def mask(self) -> NDArray[np.bool_]:
        return np.array(self.illuminated, dtype=bool)

    @classmethod
    def contiguous(cls, n_atoms: int, n_sites: int, n_illuminated: int) -> LatticeSpec:
        """Illuminate the first ``n_illuminated`` sites."""
        if not 1 <= n_illuminated <= n_sites:
            raise ValueError(f"need 1 <= K <= M, got K={n_illuminated}, M={n_sites}")
        mask = tuple(j < n_illuminated for j in range(n_sites))
        return cls(n_atoms, n_sites, mask)

    @classmethod
    def alternating(cls, n_atoms: int, n_sites: int) -> LatticeSpec:
        """Illuminate every second site (sites 1, 3, 5, ... in 1-based numbering)."""
        if n_sites % 2:
            raise ValueError(f"alternating pattern requires even n_sites, got {n_sites}")
        return cls(n_atoms, n_sites, tuple(j % 2 == 0 for j in range(n_sites)))

    @classmethod
    def full(cls, n_atoms: int, n_sites: int) -> LatticeSpec:
        return cls(n_atoms, n_sites, (True,) * n_sites)


class StateKind(str, Enum):
    SUPERFLUID = "superfluid"
    MOTT = "mott"
    CUSTOM = "custom"


@dataclass(frozen=True)
class InitialState:
    """Initial atomic state, described by squared Fock amplitudes.

    ``custom_weights`` maps configurations to ``|c_q|^2`` and is only used
    for ``kind == CUSTOM``. Amplitudes are taken real and non-negative.
    """

    kind: StateKind = StateKind.SUPERFLUID
    custom_weights: Mapping[FockConfiguration, float] | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StateKind(self.kind))
        if self.kind is StateKind.CUSTOM:
            if not self.custom_weights:
                raise ValueError("custom initial state needs custom_weights")
            total = math.fsum(self.custom_weights.values())
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"custom weights sum to {total!r}, expected 1 within 1e-12")
            if any(w < 0 for w in self.custom_weights.values()):
                raise ValueError("custom weights must be non-negative")

    def validate_for(self, lattice: LatticeSpec) -> None:
        if self.kind is StateKind.MOTT and lattice.n_atoms % lattice.n_sites:
            raise ValueError(
                f"mott state requires N divisible by M (N={lattice.n_atoms}, M={lattice.n_sites})"
            )
        if self.kind is StateKind.CUSTOM:
            for q in self.custom_weights:  # type: ignore[union-attr]
                check_configuration(q, lattice)

    def squared_amplitudes(
        self, lattice: LatticeSpec, cap: int = DEFAULT_ENUMERATION_CAP
    ) -> dict[FockConfiguration, float]:
        """Map every configuration with non-zero weight to ``|c_q|^2``."""
        self.validate_for(lattice)
        if self.kind is StateKind.MOTT:
            n = lattice.n_atoms // lattice.n_sites
            return {(n,) * lattice.n_sites: 1.0}
        if self.kind is StateKind.CUSTOM:
            return {tuple(q): float(w) for q, w in self.custom_weights.items() if w > 0}  # type: ignore[union-attr]
        return {q: math.exp(sf_log_probability(q)) for q in enumerate_configurations(lattice, cap)}


def check_configuration(q: Sequence[int], lattice: LatticeSpec) -> None:
    if len(q) != lattice.n_sites:
        raise ValueError(f"configuration {tuple(q)} has {len(q)} sites, expected {lattice.n_sites}")
    if any(x < 0 for x in q) or sum(q) != lattice.n_atoms:
        raise ValueError(f"configuration {tuple(q)} is not a placement of {lattice.n_atoms} atoms")


def configuration_count(n_atoms: int, n_sites: int) -> int:
    return math.comb(n_atoms + n_sites - 1, n_sites - 1)


def enumerate_configurations(
    lattice: LatticeSpec, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[FockConfiguration]:
    """All compositions of N into M non-negative parts, in lexicographic order.

    Raises:
        SizeError: if the number of configurations exceeds ``cap``.
    """
    n, m = lattice.n_atoms, lattice.n_sites
    count = configuration_count(n, m)
    if count > cap:
        raise SizeError(f"{count} configurations for N={n}, M={m} exceeds cap {cap}")
    return list(_compositions(n, m))


def _compositions(n: int, m: int) -> Iterator[FockConfiguration]:
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, m - 1):
            yield (first, *rest)


def sf_log_probability(config: Sequence[int]) -> float:
    """Log of the multinomial weight ``N!/(q_1!...q_M!) M^-N`` of a uniform superfluid."""
    n = sum(config)
    m = len(config)
    return math.lgamma(n + 1) - sum(math.lgamma(q + 1) for q in config) - n * math.log(m)


@dataclass(frozen=True)
class ZDistribution:
    """Unnormalized log-weights over a uniformly spaced integer grid of ``z``."""

    z_values: NDArray[np.int64]
    log_weights: NDArray[np.float64]
    step: int

    def __post_init__(self) -> None:
        z = np.array(self.z_values, dtype=np.int64)
        lw = np.array(self.log_weights, dtype=np.float64)
        if z.ndim != 1 or z.shape != lw.shape or z.size == 0:
            raise ValueError("z_values and log_weights must be equal-length non-empty vectors")
        if z.size > 1 and np.any(np.diff(z) != self.step):
            raise ValueError(f"z grid is not uniformly spaced with step {self.step}")
        if self.step < 1:
            raise ValueError("step must be a positive integer")
        z.setflags(write=False)
        lw.setflags(write=False)
        object.__setattr__(self, "z_values", z)
        object.__setattr__(self, "log_weights", lw)

    def log_normalizer(self) -> float:
        return float(logsumexp(self.log_weights))

    def probabilities(self) -> NDArray[np.float64]:
        return np.exp(self.log_weights - self.log_normalizer())

    def normalized(self) -> ZDistribution:
        return ZDistribution(self.z_values, self.log_weights - self.log_normalizer(), self.step)

    def mean(self) -> float:
        return float(np.dot(self.z_values, self.probabilities()))

    def moment(self, k: int) -> float:
        return float(np.dot(self.z_values.astype(float) ** k, self.probabilities()))

    def as_dict(self) -> dict[int, float]:
        return {int(z): float(p) for z, p in zip(self.z_values, self.probabilities())}


def z_grid(weights: Sequence[int], n_atoms: int) -> tuple[int, int, int]:
    """Return ``(z_min, step, n_points)`` of the grid reachable by ``sum w_j q_j``.

    The step is the gcd of the pairwise differences of the single-atom
    contributions; all weights equal gives a one-point grid with step 1.
    """
    w = [int(x) for x in weights]
    lo, hi = min(w), max(w)
    step = reduce(math.gcd, (x - lo for x in w), 0) or 1
    n_points = n_atoms * (hi - lo) // step + 1
    return n_atoms * lo, step, n_points


def _integer_weights(weights: Sequence[float]) -> list[int]:
    out = []
    for x in weights:
        xi = int(round(float(x)))
        if xi != x:
            raise ValueError(f"reduction weights must be integers, got {x!r}")
        out.append(xi)
    return out


def initial_z_distribution(
    lattice: LatticeSpec,
    state: InitialState,
    weights: Sequence[int],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ZDistribution:
    """Exact initial distribution ``p0(z)`` of ``z = sum_j w_j q_j``.

    For a superfluid each atom independently lands on a uniformly random site,
    so ``z`` is a sum of ``N`` iid single-atom contributions. Its law is the
    N-fold convolution of the site-weight histogram, done here in exact
    integer arithmetic; mott and custom states sum their configurations.
    """
    w = _integer_weights(weights)
    if len(w) != lattice.n_sites:
        raise ValueError(f"weights length {len(w)} != n_sites {lattice.n_sites}")
    state.validate_for(lattice)
    n, m = lattice.n_atoms, lattice.n_sites
    z_min, step, n_points = z_grid(w, n)
    z_values = z_min + step * np.arange(n_points, dtype=np.int64)

    if state.kind is StateKind.SUPERFLUID:
        lo = min(w)
        kernel = [0] * ((max(w) - lo) // step + 1)
        for x in w:
            kernel[(x - lo) // step] += 1
        counts = [1]
        for _ in range(n):
            counts = _convolve_int(counts, kernel)
        log_mn = n * math.log(m)
        log_w = np.array([math.log(c) - log_mn if c else -np.inf for c in counts])
        return ZDistribution(z_values, log_w, step)

    mass = np.zeros(n_points)
    for q, p in state.squared_amplitudes(lattice, cap).items():
        z = sum(wj * qj for wj, qj in zip(w, q))
        mass[(z - z_min) // step] += p
    with np.errstate(divide="ignore"):
        log_w = np.log(mass)
    return ZDistribution(z_values, log_w, step)


def _convolve_int(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for j, bj in enumerate(b):
        if bj:
            for i, ai in enumerate(a):
                out[i + j] += ai * bj
    return out


def brute_force_z_distribution(
    lattice: LatticeSpec, weights: Sequence[int], cap: int = DEFAULT_ENUMERATION_CAP
) -> dict[int, float]:
    """Superfluid ``p0(z)`` by enumerating every configuration (test oracle)."""
    out: dict[int, float] = {}
    for q in enumerate_configurations(lattice, cap):
        z = int(sum(wj * qj for wj, qj in zip(weights, q)))
        out[z] = out.get(z, 0.0) + math.exp(sf_log_probability(q))
    return out
