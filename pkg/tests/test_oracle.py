from __future__ import annotations

import math

import numpy as np
import pytest

from qndlight.geometry import OpticalGeometry, reduction_weights
from qndlight.lattice import InitialState, LatticeSpec, SizeError, StateKind, sf_log_probability
from qndlight.oracle import (
    PhaseAmbiguityError,
    fixed_dt_sampler,
    oracle_at,
    oracle_evolve,
    oracle_initial,
    superposition_phase,
    z_marginal,
)
from qndlight.trajectory import initial_conditional_state, simulate_batch, state_at


def test_initial_amplitudes():
    lat = LatticeSpec.contiguous(3, 3, 2)
    st = oracle_initial(lat, OpticalGeometry.diffraction_maximum(lat), InitialState())
    ref = np.array([math.exp(0.5 * sf_log_probability(tuple(q))) for q in st.configurations])
    np.testing.assert_allclose(st.amplitudes(), ref, rtol=1e-14)
    same = oracle_evolve(st, [], 0.0)
    np.testing.assert_allclose(same.amplitudes(), ref, rtol=1e-14)


def test_jump_scales_by_alpha_ratio():
    lat = LatticeSpec.contiguous(2, 2, 1)
    st = oracle_initial(lat, OpticalGeometry.diffraction_maximum(lat), InitialState())
    idx = {tuple(q): i for i, q in enumerate(st.configurations)}
    before = st.amplitudes()
    after = oracle_at(st, 1, 0.0).amplitudes()
    r0 = before[idx[(2, 0)]] / before[idx[(1, 1)]]
    r1 = after[idx[(2, 0)]] / after[idx[(1, 1)]]
    assert r1 / r0 == pytest.approx(2.0, rel=1e-14)


def test_record_order_does_not_matter():
    lat = LatticeSpec.full(3, 3)
    st = oracle_initial(lat, OpticalGeometry.diffraction_minimum(lat, detuning=0.4), InitialState())
    a = oracle_evolve(st, [0.1, 0.2, 0.9], 1.3)
    b = oracle_at(st, 3, 1.3)
    np.testing.assert_allclose(a.amplitudes(), b.amplitudes(), rtol=1e-12, atol=1e-15)


def test_initial_marginal():
    lat = LatticeSpec.contiguous(2, 2, 1)
    st = oracle_initial(lat, OpticalGeometry.diffraction_maximum(lat), InitialState())
    assert z_marginal(st, [1, 0]).as_dict() == pytest.approx({0: 0.25, 1: 0.5, 2: 0.25}, abs=1e-15)


def _engine_record(lat, geo, seed, horizon):
    eng = initial_conditional_state(lat, geo, InitialState())
    return eng, simulate_batch(eng, [seed], horizon).jump_times[0]


def test_maximum_collapses_to_single_z():
    lat = LatticeSpec.contiguous(4, 4, 2)
    geo = OpticalGeometry.diffraction_maximum(lat)
    eng, jt = _engine_record(lat, geo, 4, 20.0)
    full = oracle_evolve(oracle_initial(lat, geo, InitialState()), jt, 20.0)
    p = z_marginal(full, reduction_weights(geo).weights).probabilities()
    assert p.max() > 1 - 1e-9


def test_minimum_leaves_symmetric_pair():
    lat = LatticeSpec.full(4, 4)
    geo = OpticalGeometry.diffraction_minimum(lat)
    for seed in range(20):
        eng, jt = _engine_record(lat, geo, seed, 20.0)
        if jt.size == 0:
            continue
        full = oracle_evolve(oracle_initial(lat, geo, InitialState()), jt, 20.0)
        d = z_marginal(full, reduction_weights(geo).weights).as_dict()
        top = sorted(d, key=d.get)[-2:]
        assert sorted(top) == [-max(top), max(top)]
        assert d[top[0]] + d[top[1]] > 1 - 1e-9
        assert d[top[0]] == pytest.approx(d[top[1]], rel=1e-12)
        return
    pytest.fail("no bright record found")


@pytest.mark.parametrize("m", range(0, 7))
def test_parity_of_minimum_superposition(m):
    lat = LatticeSpec.full(4, 4)
    geo = OpticalGeometry.diffraction_minimum(lat)
    st = oracle_at(oracle_initial(lat, geo, InitialState()), m, 0.37)
    phase = superposition_phase(st, 2, -2, reduction_weights(geo).weights)
    expected = (m % 2) * math.pi
    assert abs(math.remainder(phase - expected, 2 * math.pi)) < 1e-9


def test_mirror_phase_matches_direct_accumulation():
    lat = LatticeSpec.contiguous(3, 4, 2)
    eta, u11, dp, kappa = 1.3, 1.0, 1.5, 1.0
    geo = OpticalGeometry.mirror_probe(lat, eta=eta, u11=u11, detuning=dp, kappa=kappa)
    m, t = 3, 0.8
    st = oracle_at(oracle_initial(lat, geo, InitialState()), m, t)
    w = reduction_weights(geo).weights

    def phase(z):
        a = eta / (1j * (u11 * z - dp) + kappa)
        return m * np.angle(a) + (eta * np.conj(a)).imag * t

    got = superposition_phase(st, 3, 0, w)
    ref = np.mod(phase(3) - phase(0), 2 * np.pi)
    assert got == pytest.approx(ref, abs=1e-9)
    assert min(abs(got), abs(got - math.pi), abs(got - 2 * math.pi)) > 1e-3


def test_phase_ambiguity_inside_sector():
    lat = LatticeSpec.contiguous(2, 3, 2)
    geo = OpticalGeometry([1, 1, 0], [1, 0, 0], coupling_u10=1.0, coupling_u11=1.0,
                          probe_amplitude_a0=1.0, neglect_shift=False)
    st = oracle_at(oracle_initial(lat, geo, InitialState()), 0, 1.0)
    with pytest.raises(PhaseAmbiguityError):
        superposition_phase(st, 2, 0, [1, 1, 0])


def test_mirror_without_shift_is_uniform():
    lat = LatticeSpec.full(3, 3)
    geo = OpticalGeometry.mirror_probe(lat, eta=0.7 + 0.2j, u11=0.0, detuning=0.9, kappa=1.4)
    st = oracle_initial(lat, geo, InitialState())
    np.testing.assert_allclose(st.paired_alpha, (0.7 + 0.2j) / (1.4 - 0.9j), rtol=1e-15)


def test_size_caps():
    lat = LatticeSpec.full(9, 3)
    with pytest.raises(SizeError):
        oracle_initial(lat, OpticalGeometry.diffraction_maximum(lat), InitialState())


class TestFixedDtSampler:
    def test_exponential_mean(self):
        lat = LatticeSpec.contiguous(1, 2, 1)
        geo = OpticalGeometry.diffraction_maximum(lat)
        st = oracle_initial(lat, geo, InitialState(StateKind.CUSTOM, {(1, 0): 1.0}))
        first = [fixed_dt_sampler(st, 1e-3, s, 20.0, max_jumps=1)[0] for s in range(400)]
        assert np.mean(first) == pytest.approx(0.5, abs=0.08)

    def test_dark_state_never_jumps(self):
        lat = LatticeSpec.contiguous(2, 2, 1)
        geo = OpticalGeometry.diffraction_maximum(lat)
        st = oracle_initial(lat, geo, InitialState(StateKind.CUSTOM, {(0, 2): 1.0}))
        assert fixed_dt_sampler(st, 1e-2, 1, 50.0).size == 0

    def test_coarse_step_rejected(self):
        lat = LatticeSpec.contiguous(2, 2, 1)
        st = oracle_initial(lat, OpticalGeometry.diffraction_maximum(lat), InitialState())
        with pytest.raises(ValueError, match="coarse"):
            fixed_dt_sampler(st, 0.1, 1, 1.0)
