from __future__ import annotations

import numpy as np
import pytest

from qndlight.ensemble import child_seed, ensemble_run
from qndlight.geometry import OpticalGeometry
from qndlight.lattice import InitialState, LatticeSpec, StateKind
from qndlight.trajectory import OutcomeKind, StopRule, initial_conditional_state, simulate_batch

STOP = StopRule(max_tau=200.0, stop_on_collapse=True)


def test_child_seeds_distinct_and_stable():
    seeds = [child_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert seeds[3] == child_seed(7, 3)
    assert child_seed(8, 3) != seeds[3]


def test_mott_outcomes_identical():
    lat = LatticeSpec.contiguous(4, 4, 2)
    s = ensemble_run(lat, OpticalGeometry.diffraction_maximum(lat), InitialState(StateKind.MOTT), 50, 1, STOP)
    assert set(s.outcome_labels()) == {"singlet(2)"}
    assert s.tv_distance == pytest.approx(0.0, abs=1e-12)


def test_minimum_histogram_symmetric():
    lat = LatticeSpec.full(8, 8)
    s = ensemble_run(lat, OpticalGeometry.diffraction_minimum(lat), InitialState(), 2000, 5, STOP)
    assert s.n_unresolved == 0
    counts = {r.z: r.count for r in s.histogram}
    for z in counts:
        assert counts[z] == counts[-z]  # doublets split evenly between +z and -z
    folded = [r for r in s.histogram if r.folded_count is not None]
    assert folded and sum(r.folded_count for r in folded) == pytest.approx(2000)
    assert sum(r.folded_p0 for r in folded) == pytest.approx(1.0)
    assert s.tv_distance < 0.05


def test_histogram_rows_sum_to_n_traj():
    lat = LatticeSpec.contiguous(8, 8, 4)
    s = ensemble_run(lat, OpticalGeometry.diffraction_maximum(lat), InitialState(), 1500, 2, STOP)
    assert sum(r.count for r in s.histogram) + s.n_unresolved == 1500
    assert all(r.folded_count is None for r in s.histogram)


def test_replay_from_seed_list():
    lat = LatticeSpec.contiguous(8, 8, 4)
    geo = OpticalGeometry.diffraction_maximum(lat)
    s = ensemble_run(lat, geo, InitialState(), 600, 9, STOP, workers=3)
    state = initial_conditional_state(lat, geo, InitialState())
    for i in (0, 517, 599):
        one = simulate_batch(state, [s.seeds[i]], STOP.horizon(geo), STOP.epsilon, True)
        assert one.counts[0] == s.counts[i]
        assert one.stop_time[0] == s.stop_times[i]


def test_worker_count_does_not_change_results():
    lat = LatticeSpec.contiguous(6, 6, 3)
    geo = OpticalGeometry.diffraction_maximum(lat)
    a = ensemble_run(lat, geo, InitialState(), 1100, 4, STOP, workers=1)
    b = ensemble_run(lat, geo, InitialState(), 1100, 4, STOP, workers=4)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.outcomes == b.outcomes


def test_collapse_statistics():
    lat = LatticeSpec.contiguous(6, 6, 3)
    s = ensemble_run(lat, OpticalGeometry.diffraction_maximum(lat), InitialState(), 300, 4, STOP)
    assert s.collapsed.all()
    assert 0 <= s.collapse_time_median <= s.collapse_time_max
    assert all(o.kind is OutcomeKind.SINGLET for o in s.outcomes)


def test_rejects_empty_ensemble():
    lat = LatticeSpec.contiguous(2, 2, 1)
    with pytest.raises(ValueError):
        ensemble_run(lat, OpticalGeometry.diffraction_maximum(lat), InitialState(), 0, 1, STOP)
