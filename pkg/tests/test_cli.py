import subprocess
import sys
import textwrap

import pytest

from qmagnus import cli, study
from qmagnus.discretization import PotentialSpec, SpatialGrid
from qmagnus.report import read_csv_rows


@pytest.fixture(autouse=True)
def _no_env(monkeypatch):
    monkeypatch.delenv("QMAGNUS_WORKERS", raising=False)


def _config(tmp_path, body, name="run.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return path


ORDER = """
[grid]
n = 8
[potential]
kind = "cos_mode"
[study]
kind = "order"
dt_list = ["1/2", "1/4"]
M = 16
samples_per_axis = 3
"""

THEOREM1 = """
[grid]
n = 16
[potential]
kind = "cos_mode"
[study]
kind = "theorem1_check"
dt_list = [0.1]
samples_per_axis = 5
"""


def test_study_to_stdout(tmp_path, capsys):
    assert cli.main(["study", str(_config(tmp_path, ORDER))]) == 0
    out, err = capsys.readouterr()
    assert out.startswith("study_kind,N,d,dt,M,T,error")
    assert len(out.strip().splitlines()) == 3
    assert "fit N=8" in err


def test_study_to_file_with_json_mirror(tmp_path):
    cfg = _config(tmp_path, ORDER + "[output]\njson_mirror = true\n")
    out = tmp_path / "o.csv"
    assert cli.main(["study", str(cfg), "--output", str(out)]) == 0
    assert len(read_csv_rows(out)) == 2
    assert (tmp_path / "o.json").exists()


def test_theorem1_config_passes(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["study", str(_config(tmp_path, THEOREM1)), "--output", str(out)]) == 0
    (row,) = read_csv_rows(out)
    assert float(row["error"]) <= float(row["bound_rhs"])
    assert "bound_violation" not in row["flags"]


def test_bound_violation_exit_code_and_report(tmp_path, monkeypatch):
    monkeypatch.setattr(study, "_local_bound", lambda dt, a, b: 0.0)
    out = tmp_path / "t.csv"
    assert cli.main(["study", str(_config(tmp_path, THEOREM1)), "--output", str(out)]) == 2
    (row,) = read_csv_rows(out)
    assert row["flags"] == "bound_violation"


def test_unknown_key_exit_code(tmp_path, capsys):
    assert cli.main(["study", str(_config(tmp_path, ORDER.replace("dt_list", "dtt")))]) == 3
    assert "study.dtt" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert cli.main(["study", str(tmp_path / "none.toml")]) == 3


def test_numerical_failure_exit_code(tmp_path, capsys):
    assert cli.main(["study", str(_config(tmp_path, ORDER + "[tolerances]\nunitarity = 0.0\n"))]) == 1
    assert "NotUnitary" in capsys.readouterr().err


def test_bad_worker_env(tmp_path, monkeypatch):
    monkeypatch.setenv("QMAGNUS_WORKERS", "x")
    assert cli.main(["study", str(_config(tmp_path, ORDER))]) == 3


def test_argparse_errors_exit_3():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 3
    with pytest.raises(SystemExit) as info:
        cli.main(["complexity", "--T", "1"])
    assert info.value.code == 3


def test_complexity_command(capsys):
    argv = ["complexity", "--T", "1", "--delta", "1e-3", "--N", "64", "--cv", "1", "--alpha", "1"]
    assert cli.main(argv) == 0
    out = capsys.readouterr().out
    assert "0.177828" in out
    assert cli.main(["complexity", "--T", "1", "--delta", "2", "--N", "64", "--cv", "1", "--alpha", "1"]) == 3


def test_inspect_constant_potential():
    info = cli.inspect_summary(SpatialGrid(n=4), PotentialSpec.const(5.0))
    assert info["norm_A"] == pytest.approx(32.0, abs=1e-12)
    assert info["norm_B"] == 5.0
    assert info["norm_AB"] == pytest.approx(0.0, abs=1e-12)
    assert info["h_interaction_defect"] <= 1e-12
    assert info["quantization_residual"] <= 1e-12


def test_inspect_command(capsys):
    assert cli.main(["inspect", "--n", "16", "--potential", "exp_sin"]) == 0
    out = capsys.readouterr().out
    assert "||[A,B]||" in out and "n/a" not in out
    assert cli.main(["inspect", "--n", "0"]) == 3
    assert cli.main(["inspect", "--n", "8", "--potential", "tabulated"]) == 3


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "qmagnus", "inspect", "--n", "8"], capture_output=True, text=True, check=False
    )
    assert r.returncode == 0
    assert "||A||" in r.stdout
