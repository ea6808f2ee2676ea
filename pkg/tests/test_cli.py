import csv
import io
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from reference_values import CFG_A_EIGENVALUES
from sltrans.cli import main

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
CFG_A = str(PROBLEMS / "cfg_a.toml")
CFG_B = str(PROBLEMS / "cfg_b.toml")
NEGATIVE = str(PROBLEMS / "not_self_adjoint.toml")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def table(text):
    body = [line for line in text.splitlines() if line and not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", CFG_B)
    assert code == 0
    assert "rho = 1" in out and "self-adjoint transmission: yes" in out
    code, out, _ = run(capsys, "validate", NEGATIVE)
    assert code == 0 and "self-adjoint transmission: no" in out


def test_eigs_matches_reference(capsys):
    code, out, _ = run(capsys, "eigs", CFG_A, "--lambda-min", "-5", "--lambda-max", "60", "--k", "5")
    assert code == 0
    assert out.startswith("# sltrans eigs\n")
    rows = table(out)
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4, 5]
    lams = np.array([float(r["lambda"]) for r in rows])
    ref = np.array(CFG_A_EIGENVALUES[:5])
    assert np.all(np.abs(lams - ref) <= 1e-8 * np.maximum(1, np.abs(ref)))
    assert all(abs(float(r["norm_check"]) - 1) < 1e-9 for r in rows)


def test_eigs_with_oracle(capsys):
    code, out, _ = run(capsys, "eigs", CFG_B, "--lambda-max", "80", "--oracle", "--M", "64")
    assert code == 0
    rows = table(out)
    assert rows and all(r["within_profile"] == "true" for r in rows)


def test_output_is_deterministic(tmp_path):
    outputs = []
    for name in ("one.csv", "two.csv"):
        path = tmp_path / name
        assert main(["eigs", CFG_B, "--lambda-max", "60", "--jobs", "2", "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_eigenfunction_samples(capsys):
    code, out, _ = run(capsys, "eigenfunction", CFG_B, "--n", "3", "--samples", "21")
    assert code == 0
    rows = table(out)
    assert len(rows) == 63
    tagged = [r for r in rows if r["side"]]
    assert [r["side"] for r in tagged] == ["-0", "+0", "-0", "+0"]
    (left, right) = tagged[0], tagged[1]
    # u halves across h1 in cfg_b
    assert float(right["phi"]) == pytest.approx(0.5 * float(left["phi"]), rel=1e-10)
    (left, right) = tagged[2], tagged[3]
    assert float(right["phi"]) == pytest.approx(float(left["phi"]), rel=1e-10)
    assert float(rows[0]["phi"]) == 0.0


def test_eigenfunction_index_out_of_window(capsys):
    code, _, err = run(capsys, "eigenfunction", CFG_A, "--lambda-max", "10", "--n", "7")
    assert code == 3 and "only" in err


def test_resolvent_closed_form(capsys):
    code, out, _ = run(capsys, "resolvent", CFG_A, "--lam", "0", "--rhs", "1", "--samples", "11")
    assert code == 0
    rows = table(out)
    at_zero = [r for r in rows if float(r["x"]) == 0.0]
    assert float(at_zero[0]["U1"]) == pytest.approx(0.5, abs=1e-12)
    comment = {k.strip(): v for k, v in (line[2:].split("=", 1) for line in out.splitlines() if line.startswith("# (U1)") or line.startswith("# ode_"))}
    assert float(comment["(U1)'_1"]) == pytest.approx(-1.0, abs=1e-12)
    defect = float(comment["ode_defect"])
    assert defect <= 1e-6


def test_resolvent_near_eigenvalue(capsys):
    code, _, err = run(capsys, "resolvent", CFG_A, "--lam", repr(CFG_A_EIGENVALUES[1]))
    assert code == 4 and "near eigenvalue" in err


def test_resolvent_bad_rhs(capsys):
    code, _, err = run(capsys, "resolvent", CFG_A, "--lam", "0.5", "--rhs", "1 +* x")
    assert code == 2 and "offset" in err


def test_expand(capsys):
    code, out, _ = run(capsys, "expand", CFG_A, "--lambda-max", "200", "--rhs", "x", "--T2", "0.5", "--residuals")
    assert code == 0
    rows = table(out)
    residuals = [float(r["residual_norm"]) for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(residuals, residuals[1:]))
    assert "# scalar_series" in out


def test_verify_passes_and_expected_failures(capsys):
    code, out, _ = run(capsys, "verify", CFG_A, "--lambda-max", "200", "--k", "4", "--M", "64")
    assert code == 0, out
    assert all(r["status"] == "pass" for r in table(out))
    code, out, _ = run(capsys, "verify", NEGATIVE, "--lambda-max", "200", "--k", "4", "--M", "64")
    assert code == 0, out
    statuses = {r["status"] for r in table(out)}
    assert "expected-fail" in statuses and "FAIL" not in statuses


@pytest.mark.parametrize(
    "argv",
    [
        ["eigs"],
        ["eigs", CFG_A, "--k", "-1"],
        ["resolvent", CFG_A],
        ["frobnicate", CFG_A],
        ["eigs", CFG_A, "--tol", "0"],
    ],
)
def test_bad_arguments(capsys, argv):
    assert main(argv) == 2


def test_invalid_problem_files(tmp_path, capsys):
    truncated = tmp_path / "t.toml"
    truncated.write_text(Path(CFG_A).read_text()[:60])
    code, _, err = run(capsys, "validate", str(truncated))
    assert code == 2 and "invalid problem" in err
    code, _, _ = run(capsys, "eigs", str(tmp_path / "missing.toml"))
    assert code == 2
    bad = tmp_path / "b.toml"
    bad.write_text(Path(CFG_A).read_text().replace('p = "1"', 'p = "x"'))
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 2 and "NonPositiveCoefficient" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sltrans", "validate", CFG_A], capture_output=True, text=True)
    assert proc.returncode == 0 and "rho = 1" in proc.stdout
