"""CLI surface: subcommands, exit codes, config plumbing."""

import json
import subprocess
import sys

from wigmatch.cli import main
from wigmatch.errors import EXIT_CONFIG


def run_cli(args):
    proc = subprocess.run([sys.executable, "-m", "wigmatch.cli", *args],
                          capture_output=True, text=True, timeout=600)
    return proc.returncode, proc.stdout, proc.stderr


def test_run_subcommand_in_process(capsys):
    code = main(["run", "--n", "100", "--rho", "0.9", "--epsilon", "0.0",
                 "--k0", "24", "--master-seed", "5", "--min-rounds", "0"])
    assert code == 0
    line = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert line["status"] == "ok"
    assert "overlap_final" in line


def test_run_writes_manifest(tmp_path, capsys):
    out = tmp_path / "m.json"
    code = main(["run", "--n", "80", "--rho", "0.9", "--k0", "24",
                 "--master-seed", "1", "--min-rounds", "0", "--output", str(out)])
    assert code == 0
    capsys.readouterr()
    rec = json.loads(out.read_text())
    assert rec["status"] == "ok"
    assert rec["config"]["n"] == 80


def test_config_error_exit_code(capsys):
    code = main(["run", "--n", "100", "--rho", "2.0"])
    capsys.readouterr()
    assert code == EXIT_CONFIG


def test_tiny_enumeration_gate(capsys):
    code = main(["run", "--mode", "tiny-enumeration", "--n", "50", "--k0", "2"])
    capsys.readouterr()
    assert code == EXIT_CONFIG


def test_constants_subcommand(capsys):
    code = main(["constants", "--rho", "0.8", "--n", "1000", "--k0", "24"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    for key in ("a1", "phi_second_deriv_at_zero", "lambda_cap", "eps0",
                "reference_k0_bound", "alpha", "psi_rho", "delta", "t_star"):
        assert key in out
    assert out["reference_k0_bound"] > 1e30
    assert out["t_star"] == 0


def test_selftest_subcommand(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert out.count("PASS") >= 10


def test_sweep_subcommand(tmp_path, capsys):
    csv_path = tmp_path / "rows.csv"
    summary = tmp_path / "summary.json"
    code = main(["sweep", "--n", "80", "--rho", "0.9", "--k0", "24",
                 "--min-rounds", "0", "--master-seed", "2", "--trials", "2",
                 "--epsilons", "0.0,0.05", "--strategies", "zero-out",
                 "--csv", str(csv_path), "--summary", str(summary)])
    assert code == 0
    assert "4 rows" in capsys.readouterr().out
    assert len(csv_path.read_text().strip().split("\n")) == 5


def test_cli_subprocess_smoke():
    code, out, err = run_cli(["run", "--n", "64", "--rho", "0.9", "--k0", "24",
                              "--master-seed", "3", "--min-rounds", "0"])
    assert code == 0, err
    assert json.loads(out.strip().split("\n")[-1])["status"] == "ok"


def test_cli_trials_repeats(capsys):
    code = main(["run", "--n", "64", "--rho", "0.9", "--k0", "24",
                 "--master-seed", "3", "--min-rounds", "0", "--trials", "3"])
    assert code == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.strip().split("\n")]
    assert len(lines) == 3
    assert [ln["trial"] for ln in lines] == [0, 1, 2]
