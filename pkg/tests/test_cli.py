import io
from pathlib import Path

import numpy as np
import pytest

from mare import cli, matrixfile
from mare.errors import ParseError
from mare.generators import FIXTURE_IDS, fixture

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"


def run(*argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def parse_machine(text):
    return dict(line.split("=", 1) for line in text.splitlines() if line)


# --------------------------------------------------------------------------
# matrix files


def test_matrix_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    K = -rng.uniform(size=(5, 5)) / 3.0
    np.fill_diagonal(K, 1.0 / 7.0)
    path = tmp_path / "k.mare"
    matrixfile.write(path, K, 2, comments=["hello"])
    K2, n, m = matrixfile.read(path)
    assert np.array_equal(K, K2) and (n, m) == (2, 3)


def test_shipped_fixture_files_match():
    for fid in FIXTURE_IDS:
        f = fixture(fid)
        K, n, _ = matrixfile.read(DATA / f"{fid.lower()}.mare")
        assert np.array_equal(K, f.K) and n == f.n
        if f.K_eps is not None:
            K, _, _ = matrixfile.read(DATA / f"{fid.lower()}_eps.mare")
            assert np.array_equal(K, f.K_eps)


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("mare 2\n1 1\n1 0 0 1\n", 1),
    ("mare 1\n1\n", 2),
    ("mare 1\n1 x\n", 2),
    ("mare 1\n0 1\n1\n", 2),
    ("mare 1\n# comment\n1 1\n1 0\n0 y\n", 5),
    ("mare 1\n1 1\n1 0\n0\n", 4),
    ("mare 1\n1 1\n1 0 0 inf\n", 3),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        matrixfile.parse(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_comments_anywhere():
    K, n, m = matrixfile.parse("# a\nmare 1\n# b\n1 1\n# c\n2 -1\n# d\n-1 2\n")
    assert np.array_equal(K, [[2, -1], [-1, 2]]) and (n, m) == (1, 1)


# --------------------------------------------------------------------------
# solve / analyze


def test_solve_ex1_human():
    code, text = run("solve", DATA / "ex1.mare", "--method", "schur")
    assert code == 0
    rows = text.split("phi =")[1].splitlines()[1:3]
    for row in rows:
        assert [float(x) for x in row.split()] == pytest.approx([0.0, 0.5], abs=1e-12)


def test_solve_km_exit_2(capsys):
    code, _ = run("solve", DATA / "km.mare")
    assert code == 2
    assert "regular" in capsys.readouterr().err


def test_solve_ex2_doubling_machine():
    code, text = run("solve", DATA / "ex2.mare", "--method", "doubling", "--machine")
    assert code == 0
    kv = parse_machine(text)
    assert kv["case"] == "I"
    assert float(kv["phi.0.1"]) == pytest.approx(0.5, abs=1e-10)
    assert kv["log.method"] == "doubling"


def test_machine_schema_is_golden():
    _, text = run("solve", DATA / "ex2.mare", "--method", "doubling", "--machine")
    keys = [line.split("=", 1)[0] for line in text.splitlines()]
    assert keys == (GOLDEN / "solve_machine_keys.txt").read_text().split()
    _, text = run("analyze", DATA / "ex3.mare", "--structure-only", "--machine")
    keys = [line.split("=", 1)[0] for line in text.splitlines()]
    assert keys == (GOLDEN / "analyze_structure_keys.txt").read_text().split()


def test_machine_floats_round_trip():
    _, text = run("solve", DATA / "sc1.mare", "--machine")
    kv = parse_machine(text)
    phi = float(kv["phi.0.0"])
    assert repr(phi) == kv["phi.0.0"]
    assert phi == pytest.approx((5 - np.sqrt(21)) / 2, abs=1e-14)


def test_parse_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.mare"
    bad.write_text("mare 1\n1 1\n1 2\n3 x\n")
    assert run("solve", bad)[0] == 1
    assert "line 4" in capsys.readouterr().err
    assert run("solve", tmp_path / "missing.mare")[0] == 1


def test_non_convergence_exit_3():
    code, _ = run("solve", DATA / "ex1.mare", "--method", "fixed_point", "--max-iter", "2")
    assert code == 3


def test_env_default_tol(monkeypatch):
    monkeypatch.setenv("MARE_DEFAULT_TOL", "1e-4")
    _, text = run("solve", DATA / "ex1.mare", "--method", "fixed_point", "--machine")
    loose = int(parse_machine(text)["log.iterations"])
    monkeypatch.delenv("MARE_DEFAULT_TOL")
    _, text = run("solve", DATA / "ex1.mare", "--method", "fixed_point", "--machine")
    assert int(parse_machine(text)["log.iterations"]) > loose
    monkeypatch.setenv("MARE_DEFAULT_TOL", "abc")
    assert run("solve", DATA / "ex1.mare")[0] == 1


@pytest.mark.parametrize("fid,expect", [
    ("ex3", {"r": "2", "eigvec_count": "1", "case": "III"}),
    ("ex1", {"m1": "1", "n1": "2", "r": "1", "case": "II"}),
])
def test_analyze_structure(fid, expect):
    code, text = run("analyze", DATA / f"{fid}.mare", "--machine")
    assert code == 0
    kv = parse_machine(text)
    for k, v in expect.items():
        assert kv[k] == v
    assert kv["properties.ok"] == "true"


def test_analyze_generated_nonsingular(tmp_path):
    path = tmp_path / "ns.mare"
    assert run("gen", "--category", "nonsingular", "--n", 2, "--m", 2, "--seed", 3,
               "--out", path)[0] == 0
    kv = parse_machine(run("analyze", path, "--machine", "--structure-only")[1])
    assert kv["case"] == "NonsingularK"


# --------------------------------------------------------------------------
# compare


def test_compare_sc1_all_methods():
    code, text = run("compare", DATA / "sc1.mare", "--machine")
    assert code == 0
    kv = parse_machine(text)
    assert float(kv["max_diff"]) <= 1e-10
    assert kv["succeeded"] == "4"


def test_compare_ex3_records_failures():
    code, text = run("compare", DATA / "ex3.mare", "--methods", "schur,fixed_point", "--machine")
    assert code == 0
    kv = parse_machine(text)
    assert kv["schur.status"] == "ok"
    # fixed-point converges sublinearly at a double zero eigenvalue and runs out of
    # iterations; the failure is recorded rather than fatal
    assert kv["fixed_point.status"] == "failed"
    assert kv["fixed_point.error"].startswith("MaxIterExceeded")
    assert kv["succeeded"] == "1"


def test_compare_ex3_schur_doubling_agree():
    code, text = run("compare", DATA / "ex3.mare", "--methods", "schur,doubling", "--machine")
    kv = parse_machine(text)
    assert code == 0 and float(kv["max_diff"]) <= 1e-6


def test_compare_usage():
    assert run("compare", DATA / "sc1.mare", "--methods", "schur")[0] == 1
    assert run("compare", DATA / "sc1.mare", "--methods", "schur,bogus")[0] == 1


def test_compare_disagreement_exit(tmp_path):
    # a tolerance this loose lets fixed-point stop far from the solution
    code, text = run("compare", DATA / "ex1.mare", "--methods", "schur,fixed_point",
                     "--tol", "1e-3", "--machine")
    kv = parse_machine(text)
    assert float(kv["max_diff"]) > 1e-6
    assert code != 0


# --------------------------------------------------------------------------
# hunt / gen


def test_hunt_smoke(tmp_path):
    code, text = run("hunt", "--trials", 1, "--seed", 7, "--out", tmp_path, "--machine")
    assert code == 0
    kv = parse_machine(text)
    assert "trial.0.margin" in kv and kv["solved"] == "1"


def test_hunt_case_iii_generator_skips_everything():
    code, text = run("hunt", "--trials", 3, "--category", "reducible_singular_critical",
                     "--machine")
    kv = parse_machine(text)
    assert code == 0 and kv["skipped"] == "3" and kv["solved"] == "0"
    assert all("case III" in kv[f"trial.{t}.skipped"] for t in range(3))


def test_hunt_is_reproducible():
    assert run("hunt", "--trials", 5, "--seed", 11, "--machine")[1] == \
        run("hunt", "--trials", 5, "--seed", 11, "--machine")[1]


def test_gen_round_trip(tmp_path):
    path = tmp_path / "g.mare"
    code, text = run("gen", "--category", "nonsingular", "--n", 3, "--m", 3, "--seed", 1,
                     "--out", path, "--machine")
    assert code == 0 and "kind.singular=false" in text
    K, n, m = matrixfile.read(path)
    matrixfile.write(tmp_path / "h.mare", K, n)
    K2, _, _ = matrixfile.read(tmp_path / "h.mare")
    assert np.array_equal(K, K2) and (n, m) == (3, 3)


def test_gen_reducible_then_analyze(tmp_path):
    path = tmp_path / "r.mare"
    run("gen", "--category", "reducible_singular_regular", "--n", 2, "--m", 3, "--seed", 4,
        "--out", path)
    kv = parse_machine(run("analyze", path, "--machine", "--structure-only")[1])
    assert kv["kind.irreducible"] == "false"
    assert kv["kind.regular"] == "true" and kv["kind.singular"] == "true"


def test_gen_usage_errors():
    assert run("gen", "--n", 0, "--m", 1)[0] == 1
    assert run("gen", "--n", 1)[0] == 1
    assert run("gen", "--n", 1, "--m", 1, "--category", "nope")[0] == 1


def test_gen_to_stdout_is_a_matrix_file():
    code, text = run("gen", "--n", 1, "--m", 2, "--seed", 0)
    assert code == 0
    K, n, m = matrixfile.parse(text)
    assert (n, m) == (1, 2)


def test_no_subcommand_is_usage_error():
    assert run()[0] == 1
    assert run("frobnicate")[0] == 1
