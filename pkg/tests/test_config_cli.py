from __future__ import annotations

import json
import math

import numpy as np
import pytest

from qndlight.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from qndlight.config import ConfigError, dump_config, parse_config
from qndlight.geometry import reduction_weights
from qndlight.report import fmt, read_header_config, read_table

MINIMAL = """
[lattice]
n_atoms = 100
n_sites = 100
n_illuminated = 50

[geometry]
preset = diffraction_maximum

[run]
seed = 1
max_tau = 0.5
"""

MINIMUM_ALL_SITES = """
[lattice]
n_atoms = 100
n_sites = 100
pattern = full

[geometry]
preset = diffraction_minimum

[run]
max_tau = 5
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParse:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.lattice["n_illuminated"] == 50
        assert cfg.geometry["kappa"] == 1.0
        assert cfg.run["epsilon"] == 1e-3
        echo = dump_config(cfg)
        for key in ("kappa = 1.0", "epsilon = 0.001", "kind = superfluid", "cadence = 64"):
            assert key in echo

    def test_round_trip(self):
        cfg = parse_config(MINIMAL).with_run(snapshots=(0.0, 0.005, 0.018), stop_on_collapse=True)
        assert parse_config(dump_config(cfg)) == cfg

    def test_kappa_zero_rejected(self):
        with pytest.raises(ConfigError, match="kappa") as err:
            parse_config(MINIMAL.replace("[geometry]", "[geometry]\nkappa = 0"))
        assert err.value.key == "geometry.kappa"

    @pytest.mark.parametrize(
        "patch, key",
        [
            ("[run]\nbogus = 1", "run.bogus"),
            ("[run]\nn_traj = 0", "run.n_traj"),
            ("[run]\nepsilon = nan", "run.epsilon"),
            ("[geometry]\nkappa = inf", "geometry.kappa"),
            ("[lattice]\npattern = alternating\nn_sites = 5", "lattice.pattern"),
            ("[geometry]\nkappa = abc", "geometry.kappa"),
        ],
    )
    def test_errors_name_the_key(self, patch, key):
        section, line = patch.split("\n", 1)
        text = MINIMAL
        for ln in line.split("\n"):
            k = ln.split("=")[0].strip()
            text = "\n".join(x for x in text.split("\n") if not x.startswith(k + " ="))
            text = text.replace(section, f"{section}\n{ln}")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.key == key

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="preset"):
            parse_config("[lattice]\nn_atoms = 2\nn_sites = 2\n[run]\nmax_time = 1\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + "\n[extra]\nx = 1\n")

    def test_minimum_alternates_over_all_sites(self):
        cfg = parse_config(MINIMUM_ALL_SITES)
        lat = cfg.build_lattice()
        w = reduction_weights(cfg.build_geometry(lat)).weights
        assert lat.n_illuminated == 100
        np.testing.assert_array_equal(w, [1, -1] * 50)

    def test_couplings_from_g(self):
        cfg = parse_config(MINIMAL.replace("[geometry]", "[geometry]\ng0 = 2\ng1 = 3\natom_detuning = 4"))
        assert cfg.couplings() == (1.5, 2.25)


class TestFormatting:
    def test_seventeen_digits_round_trip(self):
        for x in (0.1, 1 / 3, 2.0**-1074, 1e300, -math.pi):
            assert float(fmt(x)) == x
        assert fmt(np.int64(3)) == "3" and fmt(True) == "1"


class TestCli:
    def test_trajectory_outputs(self, tmp_path, capsys):
        cfg = write(tmp_path, MINIMAL)
        out = tmp_path / "out"
        rc = main(["run-trajectory", str(cfg), "--out-dir", str(out), "--snapshots", "0,0.005,0.018,0.03,0.05,0.5"])
        assert rc == EXIT_OK
        dumps = sorted(out.glob("distribution_*.csv"))
        assert len(dumps) == 6
        comments, rows = read_table(out / "trajectory_snapshots.csv")
        assert list(rows[0]) == ["time", "tau", "m", "mean_z", "fwhm", "photon_number_over_C2", "outcome_flag"]
        assert "# seed: 1" in comments
        summary = json.loads((out / "trajectory_summary.json").read_text())
        assert summary["seed"] == 1 and summary["counts"] == len(summary["jump_times"])
        assert summary["wall_time_s"] > 0
        for p in [out / "trajectory_snapshots.csv", *dumps]:
            assert read_header_config(p).run["snapshots"] == (0, 0.005, 0.018, 0.03, 0.05, 0.5)
        _, dist = read_table(dumps[0])
        assert math.fsum(float(r["probability"]) for r in dist) == pytest.approx(1.0, abs=1e-12)

    def test_rerun_from_header_is_identical(self, tmp_path):
        cfg = write(tmp_path, MINIMAL)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run-trajectory", str(cfg), "--out-dir", str(a), "--seed", "9"]) == EXIT_OK
        echoed = read_header_config(a / "trajectory_snapshots.csv")
        assert echoed.run["seed"] == 9
        write(tmp_path, dump_config(echoed), "echo.ini")
        assert main(["run-trajectory", str(tmp_path / "echo.ini"), "--out-dir", str(b)]) == EXIT_OK
        ja = json.loads((a / "trajectory_summary.json").read_text())["jump_times"]
        jb = json.loads((b / "trajectory_summary.json").read_text())["jump_times"]
        assert ja == jb

    def test_mott_single_snapshot(self, tmp_path):
        cfg = write(tmp_path, MINIMAL.replace("[lattice]", "[lattice]\n").replace(
            "[run]", "[initial]\nkind = mott\n\n[run]"))
        out = tmp_path / "out"
        assert main(["run-trajectory", str(cfg), "--out-dir", str(out)]) == EXIT_OK
        _, rows = read_table(out / "trajectory_snapshots.csv")
        assert len(rows) == 1 and rows[0]["outcome_flag"] == "singlet(50)"

    def test_minimum_photon_number_jumps_up(self, tmp_path):
        cfg = write(tmp_path, MINIMUM_ALL_SITES)
        out = tmp_path / "out"
        assert main(["run-trajectory", str(cfg), "--out-dir", str(out), "--seed", "3"]) == EXIT_OK
        jumps = json.loads((out / "trajectory_summary.json").read_text())["jump_times"]
        assert jumps
        # rerun the record and read the photon number on both sides of every count
        from qndlight.trajectory import initial_conditional_state, photon_number_series

        c = parse_config(MINIMUM_ALL_SITES)
        lat = c.build_lattice()
        state = initial_conditional_state(lat, c.build_geometry(lat), c.build_initial())
        jt = np.array(jumps)
        before = photon_number_series(state, jt, np.nextafter(jt, -np.inf))
        after = photon_number_series(state, jt, jt)
        assert np.all(after > before)

    def test_ensemble_outputs(self, tmp_path):
        cfg = write(tmp_path, MINIMUM_ALL_SITES.replace("n_atoms = 100\nn_sites = 100", "n_atoms = 8\nn_sites = 8")
                    .replace("max_tau = 5", "max_tau = 200\nstop_on_collapse = true"))
        out = tmp_path / "out"
        assert main(["run-ensemble", str(cfg), "--out-dir", str(out), "--n-traj", "300", "--seed", "4"]) == EXIT_OK
        _, hist = read_table(out / "ensemble_histogram.csv")
        assert "folded_count" in hist[0]
        assert sum(float(r["count"]) for r in hist) == pytest.approx(300)
        _, traj = read_table(out / "ensemble_trajectories.csv")
        assert len(traj) == 300
        summary = json.loads((out / "ensemble_summary.json").read_text())
        assert summary["n_traj"] == 300 and 0 <= summary["tv_distance"] <= 1
        assert read_header_config(out / "ensemble_histogram.csv").run["n_traj"] == 300

    def test_oracle_check_passes(self, tmp_path):
        cfg = write(tmp_path, "[lattice]\nn_atoms = 3\nn_sites = 3\n[geometry]\npreset = diffraction_minimum\n"
                              "[run]\nmax_time = 2\noracle_records = 5\noracle_checkpoints = 4\n")
        out = tmp_path / "out"
        assert main(["oracle-check", str(cfg), "--out-dir", str(out)]) == EXIT_OK
        summary = json.loads((out / "oracle_check_summary.json").read_text())
        assert summary["passed"] and summary["checkpoints"] == 20

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, MINIMAL.replace("[geometry]", "[geometry]\nkappa = 0"))
        assert main(["run-trajectory", str(cfg)]) == EXIT_CONFIG
        assert "kappa" in capsys.readouterr().err
        assert main(["run-trajectory", str(tmp_path / "missing.ini")]) == EXIT_CONFIG

    def test_runtime_error_exit_code(self, tmp_path):
        cfg = write(tmp_path, "[lattice]\nn_atoms = 20\nn_sites = 20\n[geometry]\npreset = diffraction_maximum\n"
                              "[run]\nmax_time = 1\n")
        assert main(["oracle-check", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_RUNTIME

    def test_unwritable_destination(self, tmp_path):
        cfg = write(tmp_path, MINIMAL)
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["run-trajectory", str(cfg), "--out-dir", str(blocker / "sub")]) == EXIT_RUNTIME
