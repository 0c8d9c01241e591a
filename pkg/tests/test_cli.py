import pytest

from helpers import problem_path
from ivopt.cli import main

HYP = problem_path("hyperbola.prob")
QUAD = problem_path("quad1d.prob")
FRONT = problem_path("frontier1d.prob")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_refutes_weak_lu(capsys):
    code, out, _ = run(capsys, "check", "--problem", HYP, "--kind", "wlu", "--point", "1,1")
    assert code == 1
    assert "refuted by sample point" in out
    assert "SAMPLED REGION" in out


def test_descend_then_check(tmp_path, capsys):
    code, out, _ = run(capsys, "descend", "--problem", HYP, "--point", "1,1")
    assert code == 0
    xline = [l for l in out.splitlines() if l.startswith("x*: ")][-1]
    x = xline[len("x*: (") : -1].replace(" ", "")
    code, out, _ = run(capsys, "check", "--problem", HYP, "--kind", "elu", "--point", x)
    assert code == 0 and "pass on sample" in out


def test_malformed_expression_is_input_error(tmp_path, capsys):
    f = tmp_path / "bad.prob"
    f.write_text('[problem]\nn = 1\n[objective]\nlower = "x1 +"\nupper = "x1"\n')
    code, _, err = run(capsys, "check", "--problem", str(f), "--kind", "lu", "--point", "0")
    assert code == 2
    assert "bad.prob:4:" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["check", "--problem", QUAD, "--kind", "lu"],
        ["check", "--problem", QUAD, "--kind", "lu", "--point", "1,2"],
        ["check", "--problem", QUAD, "--kind", "elu", "--point", "1", "--eps", "0.3,0.1"],
        ["kkt", "--problem", QUAD, "--point", "1", "--theorem", "elu"],
        ["frobnicate"],
        ["check", "--problem", QUAD, "--kind", "lu", "--point", "1", "--tol", "-1"],
    ],
)
def test_input_errors(argv, capsys):
    assert run(capsys, *argv)[0] == 2


def test_kkt_theorems(capsys):
    assert run(capsys, "kkt", "--problem", QUAD, "--point", "1", "--theorem", "weak")[0] == 0
    code, out, _ = run(capsys, "kkt", "--problem", QUAD, "--point", "1", "--theorem", "elu", "--assume-cc")
    assert code == 0 and "conditional" in out
    code, out, _ = run(capsys, "kkt", "--problem", QUAD, "--point", "2", "--theorem", "quasi")
    assert code == 1
    assert run(capsys, "kkt", "--problem", QUAD, "--point", "1", "--theorem", "scalar")[0] == 0
    assert run(capsys, "kkt", "--problem", QUAD, "--point", "2", "--theorem", "weak")[0] == 4


def test_scalarize(capsys):
    code, out, _ = run(capsys, "scalarize", "--problem", QUAD, "--weight", "0.5", "--budget", "500")
    assert code == 0 and "weakly E-LU for E = " in out


def test_ekeland_and_csv(tmp_path, capsys):
    f = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "ekeland", "--problem", HYP, "--csv", str(f))
    assert code == 0
    assert f.read_text().startswith("step,x1,x2,fL,fU\n")


def test_frontier_roundtrip(tmp_path, capsys):
    f = tmp_path / "front.csv"
    code, out, _ = run(capsys, "frontier", "--problem", FRONT, "--weights", "5", "--budget", "500", "--csv", str(f))
    assert code == 0
    code, out, _ = run(capsys, "check", "--problem", FRONT, "--kind", "welu", "--points-csv", str(f))
    assert code == 0
    assert out.count("pass on sample") == 5


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "--problem", QUAD, "--point", "1", "--point", "2")
    assert code == 0
    assert "x1,lu,wlu,elu,welu,eq,weq" in out


def test_out_file_matches_stdout(tmp_path, capsys):
    f = tmp_path / "report.txt"
    code, out, _ = run(capsys, "check", "--problem", QUAD, "--kind", "elu", "--point", "1", "--out", str(f))
    assert f.read_text() == out


def test_negative_coordinates(capsys):
    code, out, _ = run(capsys, "check", "--problem", HYP, "--kind", "wlu", "--point", "-1.5,0.3")
    assert code == 1 and "x*: (-1.5, 0.3)" in out
    code, out, _ = run(capsys, "check", "--problem", HYP, "--kind", "wlu", "--point=-1.5,0.3")
    assert code == 1
