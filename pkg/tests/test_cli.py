import subprocess
import sys

import pytest

from dgtime.cli import main
from dgtime.study import read_csv


def test_run_writes_single_row(tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert main(["run", "--q", "2", "--k", "0.5", "--out", str(out)]) == 0
    report = read_csv(out)
    assert len(report) == 1
    row = report.rows[0]
    assert (row.problem, row.q, row.r, row.k) == ("wave1d", 2, 1, 0.5)
    assert row.energy_error == pytest.approx(1.6504, rel=0.05)
    err = capsys.readouterr().err
    assert "stability_bound" in err and "min_rcond" in err


def test_run_dump_matrices(tmp_path, capsys):
    dump = tmp_path / "mats"
    assert main(["run", "--q", "2", "--r", "1", "--k", "0.25", "--dump-matrices", str(dump)]) == 0
    assert len(list(dump.glob("A_*.mtx"))) == 4
    assert capsys.readouterr().out.startswith("problem,q,r,k,h")


def test_study_against_golden(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["study", "--q-list", "2,3", "--levels", "0.5,0.25,0.125",
                 "--golden", "table1", "--out", str(out)])
    assert code == 0
    assert len(read_csv(out)) == 6
    assert capsys.readouterr().err.count("PASS") == 6


def test_study_failing_comparison(capsys):
    code = main(["study", "--q-list", "2", "--levels", "0.5,0.25", "--golden", "table1",
                 "--tol-error", "1e-9"])
    assert code == 1
    assert "FAIL" in capsys.readouterr().err


def test_study_2d_rates_only(capsys):
    code = main(["study", "--problem", "elasto2d", "--q-list", "2", "--levels", "0.5,0.25",
                 "--golden", "table3", "--rates-only", "--tol-rate", "0.3"])
    assert code == 0


def test_configuration_errors(capsys):
    assert main(["study", "--levels", "0.25,0.5"]) == 2
    assert main(["study", "--golden", "/nonexistent/table.csv", "--levels", "0.5"]) == 2
    assert main(["study", "--q-list", "2", "--levels", "0.3", "--golden", "table1"]) == 2
    assert main(["run", "--q", "1", "--k", "0.5"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["study", "--problem", "heat"])
    assert exc.value.code == 2


def test_console_module_entry():
    proc = subprocess.run([sys.executable, "-m", "dgtime.cli", "run", "--q", "2", "--k", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "problem,q,r,k,h,energy_error,energy_rate,l2_error,l2_rate"
