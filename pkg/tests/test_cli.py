"""Command-line surface, exercised end to end through main().

Everything here calls wavereg.cli.main with an argv list and inspects exit
codes, captured output, and the files left behind; nothing shells out.  The
float comparisons against library calls are exact because the CSV writer
serializes at 17 significant digits, which round-trips float64.
"""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from wavereg import __version__
from wavereg.cli import CliError, main, read_table
from wavereg.experiments import (
    DatumSpec,
    continuation_schedule,
    growth_experiment,
    make_datum,
    scaling_sweep,
)
from wavereg.model import PressureLaw
from wavereg.normalform import NormalFormSetting, to_normal_coords
from wavereg.spectral import Grid, norm

REPO_ROOT = Path(__file__).resolve().parents[1]


def run_simulate(outdir, *extra):
    """A small, fast simulate invocation all the tests share."""
    argv = [
        "simulate", "--epsilon", "0.1", "--pressure", "p1", "--alpha", "0.5",
        "--t-end", "0.05", "--dt", "1e-3", "--store-every", "10",
        "--n-modes", "16", "--output-dir", str(outdir),
    ]
    argv.extend(extra)
    return main(argv)


class TestExitCodes:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        out = capsys.readouterr().out
        assert "simulate" in out and "verify" in out

    def test_missing_command(self, capsys):
        assert main([]) == 1

    def test_unknown_command(self, capsys):
        assert main(["transmogrify"]) == 1

    def test_unknown_flag(self, capsys):
        assert main(["simulate", "--frobnicate", "1"]) == 1

    def test_epsilon_out_of_range_names_the_bound(self, capsys, tmp_path):
        rc = main(["simulate", "--epsilon", "1.5", "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "between 0 and 1" in capsys.readouterr().err

    def test_target_norm_names_the_bound(self, capsys, tmp_path):
        rc = run_simulate(tmp_path, "--target-norm", "0.2")
        assert rc == 1
        assert "1/6" in capsys.readouterr().err

    def test_modified_requires_p0(self, capsys, tmp_path):
        rc = main([
            "simulate", "--system", "modified", "--pressure", "p1",
            "--epsilon", "0.1", "--output-dir", str(tmp_path),
        ])
        assert rc == 1
        assert "pressure law p0" in capsys.readouterr().err

    def test_theorem_scaling_pins_alpha(self, capsys, tmp_path):
        rc = run_simulate(tmp_path, "--theorem-scaling", "--alpha", "0.3")
        assert rc == 1
        assert "pins alpha = 0.5" in capsys.readouterr().err

    def test_alpha_rejected_on_modified(self, capsys, tmp_path):
        rc = main([
            "simulate", "--system", "modified", "--epsilon", "0.1",
            "--alpha", "0.5", "--output-dir", str(tmp_path),
        ])
        assert rc == 1
        assert "use --lambda" in capsys.readouterr().err

    def test_lambda_rejected_on_regularized(self, capsys, tmp_path):
        rc = run_simulate(tmp_path, "--lambda", "0.2")
        assert rc == 1
        assert "use --alpha" in capsys.readouterr().err

    def test_missing_required_key(self, capsys, tmp_path):
        rc = main(["sweep", "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "epsilons is required" in capsys.readouterr().err

    def test_non_numeric_flag_value(self, capsys, tmp_path):
        rc = run_simulate(tmp_path, "--dt", "soon")
        assert rc == 1
        assert "expected a number" in capsys.readouterr().err


class TestConfigFile:
    def test_flags_override_config(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("epsilon = 0.2\nt_end = 0.02\npressure = p1\nalpha = 0.5\n")
        rc = main([
            "simulate", "--config", str(conf), "--epsilon", "0.1",
            "--n-modes", "16", "--store-every", "10",
            "--output-dir", str(tmp_path),
        ])
        assert rc == 0
        manifest = json.loads((tmp_path / "simulate.json").read_text())
        assert manifest["config"]["epsilon"] == 0.1  # flag wins
        assert manifest["config"]["t_end"] == 0.02  # file fills the rest

    def test_dashes_and_underscores_interchangeable(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("t-end = 0.02\nstore-every = 10\n")
        rc = main([
            "simulate", "--config", str(conf), "--epsilon", "0.1",
            "--n-modes", "16", "--output-dir", str(tmp_path),
        ])
        assert rc == 0
        manifest = json.loads((tmp_path / "simulate.json").read_text())
        assert manifest["config"]["t_end"] == 0.02

    def test_unknown_config_key(self, capsys, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("frobnicate = 1\n")
        rc = main(["simulate", "--config", str(conf), "--epsilon", "0.1",
                   "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_malformed_line(self, capsys, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("epsilon 0.1\n")
        rc = main(["simulate", "--config", str(conf),
                   "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "expected key=value" in capsys.readouterr().err

    def test_missing_file(self, capsys, tmp_path):
        rc = main(["simulate", "--config", str(tmp_path / "absent.conf"),
                   "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "cannot read config file" in capsys.readouterr().err

    def test_shipped_example_drives_simulate(self, tmp_path):
        example = REPO_ROOT / "run.conf.example"
        rc = main([
            "simulate", "--config", str(example),
            "--t-end", "0.01", "--store-every", "10", "--n-modes", "16",
            "--output-dir", str(tmp_path),
        ])
        assert rc == 0
        manifest = json.loads((tmp_path / "simulate.json").read_text())
        assert manifest["config"]["pressure"] == "p1"
        assert manifest["config"]["alpha"] == 0.5


class TestSimulate:
    def test_csv_bytes_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_simulate(a) == 0
        assert run_simulate(b) == 0
        assert (a / "simulate.csv").read_bytes() == (b / "simulate.csv").read_bytes()

    def test_csv_round_trips_through_reader(self, tmp_path):
        assert run_simulate(tmp_path) == 0
        header, rows, meta = read_table(str(tmp_path / "simulate.csv"))
        assert header == [
            "t", "norm_w1_H1", "norm_w2_L2", "norm_u1_H1", "norm_u2_L2",
            "energy", "mean_abs_u1", "mean_abs_u2", "cancellation_residual",
            "status",
        ]
        assert len(rows) == 6  # 51 steps sampled every 10, plus t = 0
        assert meta == {}
        for row in rows:
            assert row["status"] == "completed"
            assert float(row["norm_u1_H1"]) > 0.0

    def test_first_row_matches_library(self, tmp_path):
        assert run_simulate(tmp_path) == 0
        _, rows, _ = read_table(str(tmp_path / "simulate.csv"))
        amp = 0.1**0.5
        grid = Grid(16)
        spec = DatumSpec(1, 0.15, PressureLaw.P1, (1, 8), False)
        profile = make_datum(grid, spec)
        setting = NormalFormSetting(0.1, False, PressureLaw.P1, amp)
        state0 = amp * profile
        v0 = to_normal_coords(setting, state0 / amp)
        assert float(rows[0]["t"]) == 0.0
        assert float(rows[0]["norm_w1_H1"]) == norm(v0.u1, "Hs", s=1.0)
        assert float(rows[0]["norm_u1_H1"]) == norm(state0.u1, "Hs", s=1.0)

    def test_manifest_contents(self, tmp_path):
        assert run_simulate(tmp_path) == 0
        manifest = json.loads((tmp_path / "simulate.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["version"] == __version__
        assert manifest["terminal_status"] == "completed"
        assert manifest["blowup_time"] is None
        assert manifest["samples"] == 6
        assert manifest["wall_time_seconds"] > 0.0
        assert manifest["outputs"] == ["simulate.csv"]
        assert manifest["config"]["epsilon"] == 0.1
        assert manifest["config"]["band"] == [1, 8]

    def test_env_var_sets_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WAVEREG_OUTPUT_DIR", str(tmp_path))
        rc = main([
            "simulate", "--epsilon", "0.1", "--t-end", "0.01",
            "--store-every", "10", "--n-modes", "16",
        ])
        assert rc == 0
        assert (tmp_path / "simulate.csv").exists()

    def test_tag_renames_outputs(self, tmp_path):
        assert run_simulate(tmp_path, "--tag", "demo") == 0
        assert (tmp_path / "demo.csv").exists()
        assert (tmp_path / "demo.json").exists()

    def test_instant_blowup_is_still_a_successful_run(self, tmp_path):
        # a threshold below the datum norm crosses at t = 0; that is a
        # reported outcome, not a tool failure
        rc = run_simulate(tmp_path, "--rho-max", "0.1", "--tag", "burst")
        assert rc == 0
        manifest = json.loads((tmp_path / "burst.json").read_text())
        assert manifest["terminal_status"] == "blowup"
        assert manifest["blowup_time"] == 0.0


class TestSweep:
    ARGS = [
        "sweep", "--pressure", "p1", "--alpha", "0.5",
        "--epsilons", "0.2,0.1,0.05", "--t-end", "0.05", "--dt", "2e-3",
        "--n-modes", "16",
    ]

    def test_rows_and_fit_footer(self, tmp_path):
        rc = main(self.ARGS + ["--output-dir", str(tmp_path)])
        assert rc == 0
        header, rows, meta = read_table(str(tmp_path / "sweep.csv"))
        assert header == ["epsilon", "time", "status", "final_norm1",
                          "final_norm2"]
        assert [float(r["epsilon"]) for r in rows] == [0.2, 0.1, 0.05]
        assert all(r["status"] == "completed" for r in rows)
        assert all(r["time"] == "" for r in rows)
        assert meta["slope"] == "none"
        assert meta["message"] == "no blow-up observed"

    def test_rows_match_library(self, tmp_path):
        rc = main(self.ARGS + ["--output-dir", str(tmp_path)])
        assert rc == 0
        _, rows, _ = read_table(str(tmp_path / "sweep.csv"))
        spec = DatumSpec(1, 0.15, PressureLaw.P1, (1, 8), False)
        result = scaling_sweep(
            PressureLaw.P1, "regularized", (0.2, 0.1, 0.05), spec,
            amplitude_exponent=0.5, t_end=0.05, dt=2e-3, n_modes=16,
        )
        for row, expected in zip(rows, result.rows):
            assert float(row["final_norm1"]) == expected.final_norm1
            assert float(row["final_norm2"]) == expected.final_norm2

    def test_parallel_jobs_byte_identical(self, tmp_path):
        a, b = tmp_path / "serial", tmp_path / "parallel"
        assert main(self.ARGS + ["--output-dir", str(a)]) == 0
        assert main(self.ARGS + ["--jobs", "2", "--output-dir", str(b)]) == 0
        assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()

    def test_conflicting_amplitude_flags(self, capsys, tmp_path):
        rc = main([
            "sweep", "--epsilons", "0.2,0.1,0.05", "--alpha", "0",
            "--lambda", "0.2", "--output-dir", str(tmp_path),
        ])
        assert rc == 1
        assert "at most one" in capsys.readouterr().err

    def test_bad_epsilon_in_list(self, capsys, tmp_path):
        rc = main(["sweep", "--epsilons", "0.2,1.1,0.05",
                   "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "between 0 and 1" in capsys.readouterr().err


class TestGrowth:
    def test_values_match_library(self, tmp_path):
        rc = main(["growth", "--wavenumbers", "1,2,4", "--u-star", "0",
                   "--output-dir", str(tmp_path)])
        assert rc == 0
        _, rows, _ = read_table(str(tmp_path / "growth.csv"))
        expected = growth_experiment(PressureLaw.P0, 0.0, (1, 2, 4))
        assert len(rows) == 3
        for row, m in zip(rows, expected):
            assert int(row["wavenumber"]) == m.wavenumber
            assert float(row["measured"]) == m.measured
            assert float(row["predicted"]) == m.predicted

    def test_elliptic_prediction_exact(self, tmp_path):
        rc = main(["growth", "--wavenumbers", "4", "--output-dir", str(tmp_path)])
        assert rc == 0
        _, rows, _ = read_table(str(tmp_path / "growth.csv"))
        assert float(rows[0]["predicted"]) == 4.0

    def test_negative_epsilon_rejected(self, capsys, tmp_path):
        rc = main(["growth", "--epsilon", "-0.1", "--output-dir", str(tmp_path)])
        assert rc == 1
        assert "nonnegative" in capsys.readouterr().err


class TestContinue:
    def test_worked_schedule(self, tmp_path):
        rc = main([
            "continue", "--rho", "0.5", "--epsilon", "0.01", "--alpha", "0.5",
            "--output-dir", str(tmp_path),
        ])
        assert rc == 0
        manifest = json.loads((tmp_path / "continue.json").read_text())
        assert manifest["j_formula"] == 11
        assert manifest["j_star"] == 7
        assert manifest["time_sequence"][0] == pytest.approx(0.02, abs=1e-15)
        assert manifest["rho_sequence"][1] == pytest.approx(0.72, abs=1e-14)
        schedule = continuation_schedule(0.5, 0.01, 0.5)
        assert manifest["t_star"] == schedule.t_star

    def test_budget_too_coarse_exits_one(self, capsys, tmp_path):
        # eps close to 1 makes the step grain larger than the whole budget
        rc = main(["continue", "--rho", "0.5", "--epsilon", "0.9",
                   "--alpha", "0", "--output-dir", str(tmp_path)])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")


class TestPicard:
    def test_converges_on_short_horizon(self, tmp_path):
        rc = main(["picard", "--epsilon", "0.2", "--output-dir", str(tmp_path)])
        assert rc == 0
        manifest = json.loads((tmp_path / "picard.json").read_text())
        assert manifest["converged"] is True
        assert manifest["final_residual"] < 1e-10
        assert manifest["t_horizon"] == pytest.approx(0.1 * 0.2**2)
        assert all(r < 1.0 for r in manifest["contraction_ratios"])

    def test_stalling_horizon_exits_two(self, tmp_path):
        rc = main([
            "picard", "--epsilon", "0.2", "--t-horizon", "40.0",
            "--max-iter", "10", "--n-nodes", "129",
            "--output-dir", str(tmp_path),
        ])
        assert rc == 2
        manifest = json.loads((tmp_path / "picard.json").read_text())
        assert manifest["converged"] is False
        assert max(manifest["contraction_ratios"]) > 1.0

    def test_datum_guard_violation_exits_one(self, capsys, tmp_path):
        rc = main([
            "picard", "--epsilon", "0.9", "--target-norm", "0.165",
            "--band", "1,2", "--output-dir", str(tmp_path),
        ])
        assert rc == 1
        assert "below 1/6" in capsys.readouterr().err


class TestVerify:
    def test_all_legs_pass(self, capsys):
        assert main(["verify", "--n-modes", "64", "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6
        assert "FAIL" not in out
        assert "verify: 6/6 checks passed" in out

    def test_small_field_count(self, capsys):
        assert main(["verify", "--fields", "5"]) == 0
        assert "6/6" in capsys.readouterr().out

    def test_rejects_tiny_band(self, capsys):
        assert main(["verify", "--n-modes", "4"]) == 1
        assert "n_modes >= 8" in capsys.readouterr().err


class TestReadTable:
    def test_meta_and_blank_lines(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text(
            "a,b\n\n1,2\n3,4\n# slope = 2.5\n# message = one, two\n"
        )
        header, rows, meta = read_table(str(path))
        assert header == ["a", "b"]
        assert rows == [{"a": "1", "b": "2"}, {"a": "3", "b": "4"}]
        assert meta == {"slope": "2.5", "message": "one, two"}

    def test_malformed_row_raises(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2,3\n")
        with pytest.raises(CliError, match="malformed row"):
            read_table(str(path))

    def test_headerless_file_raises(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# nothing here\n")
        with pytest.raises(CliError, match="no header row"):
            read_table(str(path))

    def test_seventeen_digits_round_trip(self, tmp_path):
        values = np.random.default_rng(20240817).normal(size=50)
        path = tmp_path / "floats.csv"
        path.write_text(
            "x\n" + "\n".join(f"{v:.17g}" for v in values) + "\n"
        )
        _, rows, _ = read_table(str(path))
        assert [float(r["x"]) for r in rows] == list(values)
