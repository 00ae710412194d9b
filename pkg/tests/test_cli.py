import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fracbem.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

SMALL = ["--example", "1", "--case", "II", "--alpha", "1.0", "--N", "40", "--M", "25", "--K", "8"]


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _rms(out):
    payload = json.loads((out / "errors.json").read_text())
    (by_t,) = payload["errors"].values()
    return by_t["u"]["rms"], payload


class TestSolve:
    def test_artifacts(self, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", *SMALL, "--derivatives", "x", "xy", "--out", str(out)]) == EXIT_OK
        rows = _read_csv(out / "fields.csv")
        assert rows[0] == ["t", "node", "x", "y", "u_app", "u_ex", "u_x_app", "u_x_ex",
                           "u_xy_app", "u_xy_ex"]
        assert len(rows) == 1 + 25
        # full double precision in the CSV
        assert float(rows[1][4]) == float(format(float(rows[1][4]), ".17g"))
        rms, payload = _rms(out)
        assert rms > 0
        meta = payload["metadata"]
        assert meta["N"] == 40 and meta["M"] == 25 and "condition" in meta
        assert set(payload["errors"]["0.5"]) == {"u", "u_x", "u_xy"}
        mesh = _read_csv(out / "mesh.csv")
        assert sum(bool(r) and r[0] == "boundary_node" for r in mesh) == 40
        assert all(float(c) == float(c) for r in mesh if r and r[0] == "interior_node" for c in r[2:4])
        assert not (out / "operators.npz").exists()

    def test_dump_operators(self, tmp_path):
        out = tmp_path / "ops"
        assert main(["solve", *SMALL, "--out", str(out), "--dump-operators"]) == EXIT_OK
        with np.load(out / "operators.npz") as z:
            assert z["H"].shape == (40, 40) and z["G"].shape == (40, 40)
            assert z["interior"].shape == (25, 2)
            assert z["Psi"].shape[1] == 9
            assert "Hhat_00" in z and "U_00" in z

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["solve", *SMALL, "--out", str(a)]) == EXIT_OK
        assert main(["solve", *SMALL, "--out", str(b)]) == EXIT_OK
        for name in ("fields.csv", "mesh.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"example": "1", "case": "II", "alpha": 1.0, "N": 64,
                                   "M": 25, "K": 8, "out": str(tmp_path / "from-file")}))
        assert main(["solve", "--config", str(cfg), "--N", "40"]) == EXIT_OK
        _, payload = _rms(tmp_path / "from-file")
        assert payload["metadata"]["N"] == 40

    def test_matched_policy(self, tmp_path):
        out = tmp_path / "m"
        args = ["--example", "1", "--case", "II", "--alpha", "1.0", "--N", "40", "--K", "4"]
        assert main(["solve", *args, "--M", "matched", "--out", str(out)]) == EXIT_OK
        meta = _rms(out)[1]["metadata"]
        assert meta["M_policy"] == "matched" and meta["M"] == 100

    def test_example_two_rms(self, tmp_path):
        out = tmp_path / "e2"
        argv = ["solve", "--example", "2", "--alpha", "2", "--N", "100", "--K", "16", "--t", "0.5"]
        assert main([*argv, "--out", str(out)]) == EXIT_OK
        assert _rms(out)[0] <= 1e-3

    def test_example_one_rms(self, tmp_path):
        out = tmp_path / "e1"
        argv = ["solve", "--example", "1", "--alpha", "0.5", "--N", "160", "--M", "auto",
                "--K", "12", "--t", "1.5"]
        assert main([*argv, "--out", str(out)]) == EXIT_OK
        assert _rms(out)[0] <= 1e-4


class TestExitCodes:
    def test_small_K(self, tmp_path, capsys):
        rc = main(["solve", "--example", "2", "--alpha", "1.7", "--K", "1", "--out", str(tmp_path)])
        assert rc == EXIT_CONFIG
        assert "K >= ceil" in capsys.readouterr().err

    def test_numerical_failure(self, tmp_path, capsys):
        rc = main(["solve", *SMALL, "--rbf-c", "50", "--out", str(tmp_path)])
        assert rc == EXIT_NUMERIC
        assert "numerical failure" in capsys.readouterr().err

    @pytest.mark.parametrize("content", ["{not json", "[1, 2]", '{"colour": "red"}'])
    def test_bad_config_files(self, tmp_path, content):
        cfg = tmp_path / "c.json"
        cfg.write_text(content)
        assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    @pytest.mark.parametrize("argv", [
        ["solve", "--bogus"],
        ["frobnicate"],
        ["solve", "--M", "lots", *SMALL[:6]],
        ["solve", "--example", "9"],
        ["solve", *SMALL, "--t", "2.0"],
    ])
    def test_config_errors(self, argv, tmp_path):
        assert main([*argv, "--out", str(tmp_path)] if argv[0] == "solve" else argv) == EXIT_CONFIG

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK

    def test_console_script(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "fracbem.cli", "solve", "--example", "2",
                               "--alpha", "1.7", "--K", "1", "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == EXIT_CONFIG


class TestSweep:
    def test_N_sweep_table(self, tmp_path):
        assert main(["sweep", *SMALL, "--axis", "N", "--values", "40", "80",
                     "--out", str(tmp_path)]) == EXIT_OK
        rows = _read_csv(tmp_path / "sweep_N.csv")
        assert rows[0] == ["N", "M", "u_Linf", "u_MRE", "u_RMS", "P_order"]
        assert rows[1][-1] == "" and float(rows[2][-1]) > 0
        assert len(json.loads((tmp_path / "sweep_metadata.json").read_text())) == 2

    def test_single_value(self, tmp_path):
        assert main(["sweep", *SMALL, "--axis", "N", "--values", "40",
                     "--out", str(tmp_path)]) == EXIT_OK
        rows = _read_csv(tmp_path / "sweep_N.csv")
        assert "P_order" not in rows[0] and len(rows) == 2

    def test_K_sweep_columns(self, tmp_path):
        assert main(["sweep", *SMALL, "--axis", "K", "--values", "4", "8", "16",
                     "--out", str(tmp_path)]) == EXIT_OK
        rows = _read_csv(tmp_path / "sweep_K.csv")
        assert rows[0][-2:] == ["P_order", "b_diff_norm"]
        assert rows[1][-2:] == ["", ""]
        assert rows[2][-2] == "" and float(rows[2][-1]) > 0
        assert float(rows[3][-2]) > 0

    def test_non_geometric_K(self, tmp_path):
        assert main(["sweep", *SMALL, "--axis", "K", "--values", "4", "8", "12",
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    @pytest.mark.parametrize("extra", [["--values", "40", "80"], ["--axis", "N", "--values", "40", "40"]])
    def test_sweep_config_errors(self, tmp_path, extra):
        assert main(["sweep", *SMALL, *extra, "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_needs_exact_solution(self, tmp_path):
        assert main(["sweep", "--example", "2", "--alpha", "1.5", "--N", "40", "--M", "16",
                     "--K", "4", "--axis", "N", "--values", "40", "48",
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_example_one_N_sweep(self, tmp_path):
        assert main(["sweep", "--example", "1", "--alpha", "0.5", "--K", "12", "--t", "1.5",
                     "--axis", "N", "--values", "40", "80", "160",
                     "--out", str(tmp_path)]) == EXIT_OK
        rows = _read_csv(tmp_path / "sweep_N.csv")[1:]
        rms = [float(r[4]) for r in rows]
        assert rms[0] > rms[1] > rms[2]
        for r in rows[1:]:
            assert 1.3 <= float(r[-1]) <= 4.6

    def test_example_three_K_sweep(self, tmp_path):
        assert main(["sweep", "--example", "3", "--alpha", "1.9", "--N", "200", "--t", "1",
                     "--axis", "K", "--values", "10", "20", "40", "80", "160",
                     "--out", str(tmp_path)]) == EXIT_OK
        rms = [float(r[4]) for r in _read_csv(tmp_path / "sweep_K.csv")[1:]]
        assert all(a > b for a, b in zip(rms, rms[1:]))


class TestConvergence:
    def _report(self, tmp_path, argv):
        assert main(["convergence", *argv, "--out", str(tmp_path)]) == EXIT_OK
        return json.loads((tmp_path / "convergence.json").read_text())

    def test_report_fields(self, tmp_path):
        rep = self._report(tmp_path, [*SMALL, "--values", "4", "8", "16"])
        assert rep["K"] == [4, 8, 16] and len(rep["b_diff_norms"]) == 2
        assert rep["P_tau"] == pytest.approx(
            np.log(rep["b_diff_norms"][0] / rep["b_diff_norms"][1]) / np.log(2))
        # the three solves share one geometry
        assert len({m["M"] for m in rep["metadata"]}) == 1

    def test_identical_K(self, tmp_path):
        assert main(["convergence", *SMALL, "--values", "8", "8", "16",
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_ratio_violation(self, tmp_path):
        assert main(["convergence", *SMALL, "--values", "4", "8", "12",
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_example_two_order(self, tmp_path):
        rep = self._report(tmp_path, ["--example", "2", "--alpha", "2", "--N", "100",
                                      "--values", "8", "16", "32"])
        assert 2.8 <= rep["P_tau"] <= 4.2

    def test_example_three_order(self, tmp_path):
        rep = self._report(tmp_path, ["--example", "3", "--alpha", "1.6", "--N", "200",
                                      "--values", "10", "20", "40"])
        assert 1.7 <= rep["P_tau"] <= 3.1
