from __future__ import annotations

import numpy as np
import pytest

from qndlight.geometry import (
    OpticalGeometry,
    Scenario,
    UnsupportedScenarioError,
    branch_rates,
    couplings_from_g,
    reduction_weights,
    steady_alpha,
    tau_rate,
)
from qndlight.lattice import LatticeSpec


def test_maximum_weights():
    g = OpticalGeometry.diffraction_maximum(LatticeSpec.contiguous(5, 6, 3))
    red = reduction_weights(g)
    assert red.valid and red.scenario is Scenario.TRANSVERSE
    np.testing.assert_array_equal(red.weights, [1, 1, 1, 0, 0, 0])


def test_minimum_weights():
    red = reduction_weights(OpticalGeometry.diffraction_minimum(LatticeSpec.full(4, 4)))
    assert red.valid
    np.testing.assert_array_equal(red.weights, [1, -1, 1, -1])


def test_non_integer_products_invalid():
    g = OpticalGeometry([0.3, 0.7, 0.0], [0.3, 0.7, 0.0], coupling_u10=1.0, probe_amplitude_a0=1.0)
    assert not reduction_weights(g).valid
    with pytest.raises(UnsupportedScenarioError):
        branch_rates([0, 1], g)


def test_mixed_drive_rejected():
    g = OpticalGeometry([1.0], [1.0], coupling_u10=1.0, probe_amplitude_a0=1.0, mirror_drive_eta=1.0)
    with pytest.raises(UnsupportedScenarioError):
        reduction_weights(g)


def test_kappa_must_be_positive():
    with pytest.raises(ValueError, match="kappa"):
        OpticalGeometry([1.0], [1.0], kappa=0.0)


def test_products_must_vanish_off_mask():
    lat = LatticeSpec.contiguous(2, 3, 1)
    g = OpticalGeometry.diffraction_maximum(LatticeSpec.full(2, 3))
    with pytest.raises(ValueError, match="vanish"):
        g.validate_for(lat)


def test_transverse_alpha():
    g = OpticalGeometry.diffraction_maximum(LatticeSpec.full(3, 3))
    assert steady_alpha(3, g) == pytest.approx(-3j, abs=1e-15)


def test_minimum_alpha_is_odd():
    g = OpticalGeometry.diffraction_minimum(LatticeSpec.full(10, 10), detuning=0.3, a0=0.5 + 0.2j)
    assert steady_alpha(-5, g) == pytest.approx(-steady_alpha(5, g), abs=1e-15)


def test_mirror_resonance():
    lat = LatticeSpec.full(5, 5)
    g = OpticalGeometry.mirror_probe(lat, eta=1.0, u11=0.2, detuning=1.0, kappa=0.5)
    assert steady_alpha(5, g) == pytest.approx(2.0, abs=1e-15)
    b = branch_rates([5], g)
    assert b.phase_rate[0] == pytest.approx(0.0, abs=1e-15)
    assert tau_rate(g) is None


def test_branch_rates_maximum():
    g = OpticalGeometry.diffraction_maximum(LatticeSpec.full(4, 4))
    b = branch_rates([0, 4], g)
    assert b.decay_rate[0] == 0 and b.phase_rate[0] == 0
    assert b.decay_rate[1] == pytest.approx(32.0)
    assert tau_rate(g) == pytest.approx(2.0)


def test_decay_rate_equals_twice_intensity_times_kappa():
    g = OpticalGeometry.diffraction_minimum(LatticeSpec.full(6, 6), detuning=-0.7, kappa=1.7, a0=0.3 - 0.4j)
    b = branch_rates(np.arange(-6, 7, 2), g)
    np.testing.assert_allclose(b.decay_rate, 2 * np.abs(b.alpha) ** 2 * 1.7, rtol=1e-15)


def test_intensity_classes_pair_signs_at_minimum():
    g = OpticalGeometry.diffraction_minimum(LatticeSpec.full(4, 4))
    b = branch_rates([-4, -2, 0, 2, 4], g)
    lab = b.intensity_classes()
    assert lab[0] == lab[4] and lab[1] == lab[3]
    assert len(set(lab.tolist())) == 3


def test_couplings_from_g():
    assert couplings_from_g(2.0, 3.0, 4.0) == (1.5, 2.25)
    with pytest.raises(ValueError):
        couplings_from_g(1.0, 1.0, 0.0)
