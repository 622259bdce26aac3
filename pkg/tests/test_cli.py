import json
import subprocess
import sys

import numpy as np
import pytest

from quasisquare.cli import EXIT_CHECK, EXIT_INPUT, EXIT_INTEGRATION, EXIT_OK, EXIT_SOLVER, main
from quasisquare.tables import read_table, write_table


@pytest.fixture(scope="module")
def hg_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("hg")
    assert main(["design", "--protocol", "tcap-hg", "--out", str(out)]) == EXIT_OK
    return out


def test_design_outputs(hg_dir):
    cols = read_table(hg_dir / "controls.csv", ("t", "omega", "delta", "laser_phase"))
    meta = json.loads((hg_dir / "design.json").read_text())
    assert cols["t"].size == meta["samples"] == 4001
    assert meta["config"]["protocol"] == "tcap-hg"
    assert abs(meta["sigma"] - 1.095) / 1.095 < 0.01
    assert abs(meta["peak_ratio"] - 0.84) / 0.84 < 0.01
    assert abs(meta["pulse_area"] - meta["base_area_window"]) / meta["pulse_area"] < 1e-6


def test_csv_format(hg_dir):
    raw = (hg_dir / "controls.csv").read_bytes()
    assert b"\r" not in raw
    header, first = raw.decode("utf-8").splitlines()[:2]
    assert header == "t,omega,delta,laser_phase"
    mantissa = first.split(",")[0].split("e")[0].lstrip("-")
    assert len(mantissa.replace(".", "")) == 17


def test_design_byte_identical(hg_dir, tmp_path):
    assert main(["design", "--protocol", "tcap-hg", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "controls.csv").read_bytes() == (hg_dir / "controls.csv").read_bytes()


def test_simulate_round_trip(hg_dir, tmp_path, capsys):
    assert main(["simulate", str(hg_dir / "controls.csv"), "--out", str(tmp_path)]) == EXIT_OK
    printed = float(capsys.readouterr().out.strip())
    traj = read_table(tmp_path / "trajectory.csv", ("t", "p_ground", "p_excited", "theta", "gamma"))
    assert traj["t"].size == 2001
    assert abs(traj["p_ground"][-1] + traj["p_excited"][-1] - 1) < 1e-10
    assert printed == pytest.approx(traj["p_ground"][-1], abs=1e-10)


def test_controls_csv_is_lossless(hg_dir):
    from quasisquare.cli import DEFAULTS, build_design

    c, _, _ = build_design(dict(DEFAULTS, protocol="tcap-hg"))
    cols = read_table(hg_dir / "controls.csv")
    assert np.array_equal(cols["t"], c.time_grid)
    assert np.array_equal(cols["omega"], c.rabi) and np.array_equal(cols["delta"], c.detuning)


def test_scan_command(hg_dir, tmp_path, capsys):
    args = ["scan", str(hg_dir / "controls.csv"), "--axis", "beta", "--range", "-0.1", "0.1",
            "--points", "5", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    cols = read_table(tmp_path / "scan_beta.csv", ("value", "infidelity", "log10_infidelity"))
    assert np.allclose(cols["value"], np.linspace(-0.1, 0.1, 5))
    first = (tmp_path / "scan_beta.csv").read_bytes()
    assert main(args) == EXIT_OK
    assert (tmp_path / "scan_beta.csv").read_bytes() == first


def test_flat_pi_alpha_scan_slope(tmp_path, capsys):
    assert main(["design", "--protocol", "flat-pi", "--samples", "1001", "--out", str(tmp_path)]) == EXIT_OK
    capsys.readouterr()
    assert main(["scan", str(tmp_path / "controls.csv"), "--range", "0.001", "0.01", "--points", "9",
                 "--out", str(tmp_path)]) == EXIT_OK
    slope = float(capsys.readouterr().out.split()[1])
    assert abs(slope - 2) < 0.1


def test_flat_pi_simulate_alpha(tmp_path, capsys):
    main(["design", "--protocol", "flat-pi", "--out", str(tmp_path)])
    capsys.readouterr()
    main(["simulate", str(tmp_path / "controls.csv"), "--alpha", "0.1", "--out", str(tmp_path)])
    assert float(capsys.readouterr().out) == pytest.approx(np.cos(1.1 * np.pi / 2) ** 2, abs=1e-10)


def test_config_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"protocol": "flat-pi", "samples": 11, "omega0": 2.0}))
    assert main(["design", "--config", str(cfg), "--samples", "21", "--out", str(tmp_path)]) == EXIT_OK
    meta = json.loads((tmp_path / "design.json").read_text())
    assert meta["config"]["samples"] == 21 and meta["config"]["omega0"] == 2.0
    assert meta["duration"] == pytest.approx(np.pi / 2)


def test_rio_design_small_grid(tmp_path):
    args = ["design", "--protocol", "rio", "--grid-points", "128", "--multistart", "1", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    meta = json.loads((tmp_path / "design.json").read_text())
    assert abs(meta["geodesic_area"] - 5.84) < 0.05
    assert meta["peak_rabi"] == pytest.approx(2.77)


@pytest.mark.parametrize("argv", [
    ["design", "--protocol", "nope"],
    ["design", "--protocol", "rio", "--grid-points", "10"],
    ["design", "--protocol", "tcap-hg", "--a", "1"],
    ["design", "--protocol", "tcap-hg", "--n", "13"],
    ["design", "--samples", "1"],
    ["simulate", "missing.csv"],
])
def test_bad_input_exit_code(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_INPUT


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["design", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_INPUT
    cfg.write_text("{not json")
    assert main(["design", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_INPUT


def test_malformed_csv_exit_code(tmp_path):
    bad = tmp_path / "c.csv"
    bad.write_text("t,omega,delta\n0,1,0\n1,x,0\n")
    assert main(["simulate", str(bad), "--out", str(tmp_path)]) == EXIT_INPUT
    bad.write_text("t,omega\n0,1\n1,1\n")
    assert main(["simulate", str(bad), "--out", str(tmp_path)]) == EXIT_INPUT
    bad.write_text("t,omega,delta\n1,1,0\n0,1,0\n")
    assert main(["simulate", str(bad), "--out", str(tmp_path)]) == EXIT_INPUT


def test_solver_failure_exit_code(tmp_path):
    args = ["design", "--protocol", "rio", "--grid-points", "64", "--multistart", "1", "--tol", "1e-30",
            "--out", str(tmp_path)]
    assert main(args) == EXIT_SOLVER


def test_integration_failure_exit_code(tmp_path):
    c = tmp_path / "c.csv"
    write_table(c, {"t": [0.0, 0.5, 1.0], "omega": [1e12] * 3, "delta": [0.0] * 3})
    assert main(["simulate", str(c), "--out", str(tmp_path)]) == EXIT_INTEGRATION
    assert main(["scan", str(c), "--points", "3", "--out", str(tmp_path)]) == EXIT_INTEGRATION


def test_reproduce_fig4(tmp_path, capsys):
    assert main(["reproduce", "fig4", "--out", str(tmp_path)]) == EXIT_OK
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["checks"] and all(c["passed"] for c in manifest["checks"])
    assert "[PASS] sigma" in capsys.readouterr().out
    assert (tmp_path / "controls.csv").exists() and (tmp_path / "trajectory.csv").exists()


def test_reproduce_check_failure_exit_code(tmp_path, monkeypatch):
    from quasisquare import cli

    monkeypatch.setitem(cli.FIGURES, "fig1", lambda out: [{"name": "x", "passed": False, "value": 1, "detail": "d"}])
    assert main(["reproduce", "fig1", "--out", str(tmp_path)]) == EXIT_CHECK


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "quasisquare", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "reproduce" in res.stdout
