import csv
import json
import subprocess
import sys

import pytest

from gwpenal.cli import CSV_COLUMNS, main
from gwpenal.trees import parse_typed_tree


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_inspect_reports_the_law(capsys):
    code, out = run(capsys, "inspect", "--q", "schroeder")
    report = json.loads(out)
    assert code == 0
    assert report["mu"] == "5/4" and report["kappa"] == "1/2" and report["gamma"] == "3/4"
    assert report["schema_version"] == 1 and report["command"] == "inspect"


def test_inline_json_distribution(capsys):
    code, out = run(capsys, "inspect", "--q", '{"probs": ["1/2", "0", "1/2"]}')
    assert code == 0 and json.loads(out)["mu"] == 1


def test_penalize_limit(capsys):
    code, out = run(capsys, "penalize", "--q", "schroeder", "--weight", "geom:p=1,s=1/2", "--event", "z_eq:1")
    report = json.loads(out)
    assert code == 0 and report["limit"] == "1/3" and report["converged"]


def test_configuration_errors_exit_2(capsys):
    assert main(["inspect"]) == 2
    assert main(["inspect", "--q", "no/such/file.json"]) == 2
    assert main(["penalize", "--q", "schroeder", "--weight", "geom:p=1,s=1"]) == 2
    assert main(["inspect", "--q", "schroeder", "--tol", "2"]) == 2
    assert main(["no-such-command"]) == 2
    capsys.readouterr()


def test_nonconvergence_exits_3(capsys):
    code, out = run(capsys, "penalize", "--q", "schroeder", "--weight", "geom:p=1,s=0.3", "--event", "z_eq:1",
                    "--mmax", "5")
    assert code == 3 and not json.loads(out)["converged"]


def test_failed_verification_exits_1(capsys):
    # the slow decay of phi towards kappa defeats one clause of criterion 6
    code, out = run(capsys, "verify-all", "--only", "6")
    assert code == 1 and json.loads(out)["passed"] is False


def test_artifacts_are_byte_identical_across_runs(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["spine", "stats", "--q", "schroeder", "--p", "2", "--height", "3", "--samples", "2000",
                     "--seed", "5", "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    for name in ("spine_stats.json", "spine_stats.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("argv, name", [
    (["jet", "--q", "schroeder", "--n", "2"], "jet"),
    (["penalize", "--q", "schroeder", "--weight", "laplace:p=1,a=0", "--event", "z_eq:2"], "penalize"),
    (["martingale", "--q", "schroeder", "--spec", "penalized_p", "--p", "2"], "martingale"),
    (["limits", "--q", "schroeder", "--p", "2", "--a", "0,1", "--s", "0.5"], "limits"),
])
def test_csv_headers(tmp_path, capsys, argv, name):
    assert main(argv + ["--out", str(tmp_path)]) == 0
    capsys.readouterr()
    with open(tmp_path / f"{name}.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS[name] and len(rows) > 1
    assert json.loads((tmp_path / f"{name}.json").read_text())["command"] == name


def test_spine_sample_output_parses(capsys):
    code, out = run(capsys, "spine", "sample", "--q", "schroeder", "--p", "2", "--height", "3", "--count", "3",
                    "--seed", "4")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 3
    assert all(parse_typed_tree(line).root_type == 2 for line in lines)


def test_spine_verify(capsys):
    code, out = run(capsys, "spine", "verify", "--q", "schroeder", "--p", "2", "--n", "2", "--maxk", "2")
    assert code == 0 and json.loads(out)["max_gap"] in (0, "0")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gwpenal", "inspect", "--q", "critical"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["regime"] == "critical"
