"""Optical geometry and the steady-state light amplitude of each z-branch.

With the tunnelling neglected, every Fock configuration ``q`` is paired with a
coherent cavity field whose steady-state amplitude is the classical Lorentzian

    alpha_q = (eta - i U10 a0 D10_q) / (i (U11 D11_q - dp) + kappa)

In the two canonical scenarios (transverse probe with the mode shift
neglected, or a probe through the cavity mirror) ``alpha_q`` depends on ``q``
only through one integer statistic ``z``; :func:`reduction_weights` finds it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .lattice import LatticeSpec


class UnsupportedScenarioError(ValueError):
    """The geometry has no single-statistic reduction (mixed drives)."""


class Scenario(str, Enum):
    TRANSVERSE = "transverse"
    MIRROR = "mirror"


class GeometryPreset(str, Enum):
    DIFFRACTION_MAXIMUM = "diffraction_maximum"
    DIFFRACTION_MINIMUM = "diffraction_minimum"
    MIRROR_PROBE = "mirror_probe"
    CUSTOM = "custom"


def couplings_from_g(g0: float, g1: float, atom_detuning: float) -> tuple[float, float]:
    """Return ``(U10, U11)`` from the coupling constants and the cavity-atom detuning."""
    if atom_detuning == 0:
        raise ValueError("atom_detuning must be non-zero")
    return g1 * g0 / atom_detuning, g1 * g1 / atom_detuning


@dataclass(frozen=True)
class OpticalGeometry:
    """Mode overlaps on every site plus the cavity and drive parameters.

    Rates (``kappa``, ``detuning_dp``, couplings, ``eta``) share one frequency
    unit; the presets use ``kappa = 1`` so time is measured in ``1/kappa``.
    """

    mode_products_10: NDArray[np.complex128]
    mode_products_11: NDArray[np.float64]
    coupling_u10: float = 0.0
    coupling_u11: float = 0.0
    probe_amplitude_a0: complex = 0.0
    mirror_drive_eta: complex = 0.0
    detuning_dp: float = 0.0
    kappa: float = 1.0
    neglect_shift: bool = True
    preset: GeometryPreset = GeometryPreset.CUSTOM

    def __post_init__(self) -> None:
        mp10 = np.array(self.mode_products_10, dtype=np.complex128)
        mp11 = np.array(self.mode_products_11, dtype=np.float64)
        if mp10.ndim != 1 or mp10.shape != mp11.shape:
            raise ValueError("mode product vectors must be 1-D and of equal length")
        for name in ("coupling_u10", "coupling_u11", "detuning_dp", "kappa"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        mp10.setflags(write=False)
        mp11.setflags(write=False)
        object.__setattr__(self, "mode_products_10", mp10)
        object.__setattr__(self, "mode_products_11", mp11)
        object.__setattr__(self, "probe_amplitude_a0", complex(self.probe_amplitude_a0))
        object.__setattr__(self, "mirror_drive_eta", complex(self.mirror_drive_eta))
        object.__setattr__(self, "preset", GeometryPreset(self.preset))

    @property
    def n_sites(self) -> int:
        return self.mode_products_10.size

    def validate_for(self, lattice: LatticeSpec) -> None:
        if self.n_sites != lattice.n_sites:
            raise ValueError(f"geometry has {self.n_sites} sites, lattice has {lattice.n_sites}")
        dark = ~lattice.mask
        if np.any(self.mode_products_10[dark] != 0) or np.any(self.mode_products_11[dark] != 0):
            raise ValueError("mode products must vanish outside the illuminated sites")

    @property
    def scenario(self) -> Scenario:
        transverse = self.probe_amplitude_a0 != 0 and self.coupling_u10 != 0
        mirror = self.mirror_drive_eta != 0
        if transverse and not mirror:
            return Scenario.TRANSVERSE
        if mirror and self.probe_amplitude_a0 == 0:
            return Scenario.MIRROR
        raise UnsupportedScenarioError(
            "need exactly one drive: transverse (a0 != 0, eta = 0) or mirror (eta != 0, a0 = 0)"
        )

    # presets -------------------------------------------------------------

    @classmethod
    def diffraction_maximum(
        cls,
        lattice: LatticeSpec,
        *,
        u10: float = 1.0,
        a0: complex = 1.0,
        detuning: float = 0.0,
        kappa: float = 1.0,
        u11: float = 0.0,
    ) -> OpticalGeometry:
        """Transverse probe at the Bragg angle: all illuminated atoms scatter in phase."""
        mask = lattice.mask.astype(float)
        return cls(mask.astype(complex), mask, u10, u11, a0, 0.0, detuning, kappa,
                   True, GeometryPreset.DIFFRACTION_MAXIMUM)

    @classmethod
    def diffraction_minimum(
        cls,
        lattice: LatticeSpec,
        *,
        u10: float = 1.0,
        a0: complex = 1.0,
        detuning: float = 0.0,
        kappa: float = 1.0,
        u11: float = 0.0,
    ) -> OpticalGeometry:
        """Transverse probe where neighbouring sites scatter out of phase, ``(-1)^(j+1)``."""
        mask = lattice.mask.astype(float)
        sign = np.where(np.arange(lattice.n_sites) % 2 == 0, 1.0, -1.0)
        return cls((sign * mask).astype(complex), mask, u10, u11, a0, 0.0, detuning, kappa,
                   True, GeometryPreset.DIFFRACTION_MINIMUM)

    @classmethod
    def mirror_probe(
        cls,
        lattice: LatticeSpec,
        *,
        eta: complex = 1.0,
        u11: float = 1.0,
        detuning: float = 0.0,
        kappa: float = 1.0,
    ) -> OpticalGeometry:
        """Cavity driven through its mirror; the atoms only shift the resonance."""
        mask = lattice.mask.astype(float)
        return cls(mask.astype(complex), mask, 0.0, u11, 0.0, eta, detuning, kappa,
                   False, GeometryPreset.MIRROR_PROBE)

    @classmethod
    def from_preset(cls, preset: GeometryPreset | str, lattice: LatticeSpec, **params) -> OpticalGeometry:
        preset = GeometryPreset(preset)
        if preset is GeometryPreset.DIFFRACTION_MAXIMUM:
            return cls.diffraction_maximum(lattice, **params)
        if preset is GeometryPreset.DIFFRACTION_MINIMUM:
            return cls.diffraction_minimum(lattice, **params)
        if preset is GeometryPreset.MIRROR_PROBE:
            return cls.mirror_probe(lattice, **params)
        raise ValueError("custom geometries are built with the OpticalGeometry constructor")


class Reduction(NamedTuple):
    """Integer site weights ``w`` with ``D = scale * sum_j w_j q_j``."""

    weights: NDArray[np.int64]
    valid: bool
    scale: complex
    scenario: Scenario


def _integer_proportional(products: NDArray[np.complex128]) -> tuple[NDArray[np.int64], bool, complex]:
    nonzero = products[products != 0]
    if nonzero.size == 0:
        return np.zeros(products.size, dtype=np.int64), True, 1.0 + 0j
    mags = np.abs(nonzero)
    scale = complex(mags.min() * nonzero[0] / abs(nonzero[0]))
    ratios = products / scale
    rounded = np.round(ratios.real)
    valid = bool(np.allclose(ratios, rounded, rtol=0, atol=1e-12))
    return rounded.astype(np.int64), valid, scale


def reduction_weights(geometry: OpticalGeometry) -> Reduction:
    """Per-site integer weights of the statistic ``z`` that fixes ``alpha``.

    Transverse probing uses the probe-cavity overlaps (the mode shift must be
    neglected, otherwise ``D10`` and ``D11`` are independent); mirror probing
    uses the cavity-mode intensities.

    Raises:
        UnsupportedScenarioError: for mixed or absent drives.
    """
    scenario = geometry.scenario
    if scenario is Scenario.TRANSVERSE:
        w, valid, scale = _integer_proportional(geometry.mode_products_10)
        if not geometry.neglect_shift and geometry.coupling_u11 != 0 and np.any(geometry.mode_products_11):
            valid = False
        return Reduction(w, valid, scale, scenario)
    w, valid, scale = _integer_proportional(geometry.mode_products_11.astype(np.complex128))
    return Reduction(w, valid and scale.imag == 0, scale, scenario)


def general_alpha(d10: ArrayLike, d11: ArrayLike, geometry: OpticalGeometry) -> NDArray[np.complex128]:
    """Steady-state amplitude for given realizations of ``D10`` and ``D11`` (no neglect)."""
    g = geometry
    d10 = np.asarray(d10, dtype=np.complex128)
    d11 = np.asarray(d11, dtype=np.float64)
    num = g.mirror_drive_eta - 1j * g.coupling_u10 * g.probe_amplitude_a0 * d10
    den = 1j * (g.coupling_u11 * d11 - g.detuning_dp) + g.kappa
    return num / den


def general_phase_rate(
    d10: ArrayLike, alpha: ArrayLike, geometry: OpticalGeometry
) -> NDArray[np.float64]:
    """Imaginary rate of the exponent: ``Im(eta alpha* - i U10 a0 D10 alpha*)``."""
    g = geometry
    ac = np.conj(np.asarray(alpha, dtype=np.complex128))
    a = g.mirror_drive_eta * ac - 1j * g.coupling_u10 * g.probe_amplitude_a0 * np.asarray(d10) * ac
    return np.asarray(a.imag, dtype=np.float64)


def _statistic_values(z: ArrayLike, geometry: OpticalGeometry) -> tuple[NDArray, NDArray, Reduction]:
    red = reduction_weights(geometry)
    z = np.asarray(z, dtype=np.float64)
    if red.scenario is Scenario.TRANSVERSE:
        return red.scale * z, np.zeros_like(z), red
    return np.zeros_like(z, dtype=np.complex128), red.scale.real * z, red


def steady_alpha(z: ArrayLike, geometry: OpticalGeometry) -> NDArray[np.complex128] | complex:
    """Steady-state amplitude of the branch with reduced statistic ``z``.

    Transverse probing feeds ``z`` into ``D10`` and drops the ``U11 D11``
    shift; mirror probing feeds it into ``D11``.
    """
    d10, d11, _ = _statistic_values(z, geometry)
    alpha = general_alpha(d10, d11, geometry)
    return complex(alpha) if alpha.ndim == 0 else alpha


@dataclass(frozen=True)
class BranchSet:
    """Per-z amplitude, weight decay rate ``2|alpha|^2 kappa`` and phase rate."""

    z_values: NDArray[np.int64]
    alpha: NDArray[np.complex128]
    decay_rate: NDArray[np.float64]
    phase_rate: NDArray[np.float64]
    kappa: float
    scenario: Scenario

    @property
    def log_intensity(self) -> NDArray[np.float64]:
        """``log|alpha_z|^2``; ``-inf`` on dark branches."""
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(np.abs(self.alpha))

    @property
    def intensity(self) -> NDArray[np.float64]:
        return np.abs(self.alpha) ** 2

    def intensity_classes(self, rtol: float = 1e-9) -> NDArray[np.int64]:
        """Label branches that share the same ``|alpha|`` (photon counting cannot tell them apart)."""
        inten = self.intensity
        labels = np.full(inten.size, -1, dtype=np.int64)
        nxt = 0
        for i in range(inten.size):
            if labels[i] >= 0:
                continue
            same = np.isclose(inten, inten[i], rtol=rtol, atol=0) & (labels < 0)
            labels[same] = nxt
            nxt += 1
        return labels


def branch_rates(z_grid: ArrayLike, geometry: OpticalGeometry) -> BranchSet:
    """Amplitudes and exponent rates for every grid point.

    The real part of the exponent's drive bracket cancels against its complex
    conjugate, so the weight of branch ``z`` decays at exactly ``2|alpha_z|^2
    kappa`` and the bracket contributes only a phase.
    """
    z = np.asarray(z_grid, dtype=np.int64)
    d10, d11, red = _statistic_values(z, geometry)
    if not red.valid:
        raise UnsupportedScenarioError("mode products are not integer-proportional; use the exact oracle")
    alpha = general_alpha(d10, d11, geometry)
    decay = 2.0 * np.abs(alpha) ** 2 * geometry.kappa
    phase = general_phase_rate(d10, alpha, geometry)
    for arr in (z, alpha, decay, phase):
        arr.setflags(write=False)
    return BranchSet(z, alpha, decay, phase, geometry.kappa, red.scenario)


def tau_rate(geometry: OpticalGeometry) -> float | None:
    """``d tau / d t = 2 |C|^2 kappa`` for transverse probing, ``None`` for mirror probing.

    ``C`` is the amplitude per unit of the reduced statistic, ``alpha_z = C z``.
    """
    red = reduction_weights(geometry)
    if red.scenario is not Scenario.TRANSVERSE:
        return None
    g = geometry
    c = 1j * g.coupling_u10 * g.probe_amplitude_a0 * red.scale / (1j * g.detuning_dp - g.kappa)
    return 2.0 * abs(c) ** 2 * g.kappa
