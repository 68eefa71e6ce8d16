import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipext.cli import main
from lipext.extension import coordinatewise_extend, extend_sa, mcshane_extend
from lipext.io import (
    ProblemFileError,
    dumps,
    load_problem,
    load_result,
    problem_from_json,
    problem_to_json,
    result_from_json,
    result_to_json,
    write_json,
)
from lipext.oracle import four_point_example, four_point_sa, random_instance
from lipext.sampling import make_rng
from lipext.spaces import SpaceDescriptor

LINE = {
    "space": {"kind": "real-sup", "k": 1},
    "metric": {"labels": [0, 1, 2], "dist": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]},
    "subset": [0, 2],
    "values": {"0": [0.0], "2": 1.0},
}


def _as_sequence(f):
    """Re-read a complex-plane problem as a one-coordinate complex sequence problem."""
    obj = problem_to_json(f)
    obj["space"] = {"kind": "seq-sup-complex", "k": 1}
    obj["values"] = {k: [v] for k, v in obj["values"].items()}
    return problem_from_json(obj)


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


# --- problem files -----------------------------------------------------------


@pytest.mark.parametrize(
    "desc",
    [
        SpaceDescriptor.real_sup(2),
        SpaceDescriptor.real_euclid(3),
        SpaceDescriptor.complex_plane(),
        SpaceDescriptor.seq_sup_complex(2),
        SpaceDescriptor.matrix_full(2),
        SpaceDescriptor.matrix_sa(3),
    ],
    ids=str,
)
def test_problem_round_trip(desc):
    f = random_instance(desc, make_rng(1))
    g = problem_from_json(json.loads(dumps(problem_to_json(f))))
    np.testing.assert_array_equal(g.values, f.values)
    np.testing.assert_array_equal(g.space.dist, f.space.dist)
    assert g.subset == f.subset and g.target == f.target


def test_complex_values_are_pairs():
    obj = problem_to_json(four_point_example())
    assert obj["values"]["alpha"] == [1.0, 0.0]
    mat = problem_to_json(four_point_sa())["values"]["alpha"]
    assert np.array(mat).shape == (2, 2, 2)


@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_floats_round_trip_with_17_digits(x):
    assert float(json.loads(dumps([x]))[0]) == x


def test_float_format_has_17_significant_digits():
    assert dumps(0.1).strip() == "0.10000000000000001"
    assert dumps(2.0).strip() == "2.0"
    with pytest.raises(ValueError):
        dumps(float("nan"))


@pytest.mark.parametrize(
    "patch, message",
    [
        ({"space": {"kind": "weird"}}, "unknown space kind"),
        ({"space": {"kind": "mn-sa"}}, "space: missing field 'n'"),
        ({"space": {"kind": "real-sup", "k": 0}}, r"space\.k"),
        ({"metric": {"labels": [0, 1, 2], "dist": [[0, 1], [1, 0]]}}, r"metric\.dist"),
        ({"metric": {"labels": [0, 1, 2], "dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}}, "triangle"),
        ({"subset": [0, 7]}, r"subset\[1\]"),
        ({"values": {"0": [0.0]}}, "no value for subset label 2"),
        ({"values": {"0": [0.0], "2": [1.0, 2.0]}}, r"values\['2'\]"),
        ({"values": {"0": [0.0], "2": [1.0], "1": [3.0]}}, "not in subset"),
        ({"subset": [0, 0]}, "duplicate"),
    ],
)
def test_problem_errors_name_the_field(patch, message):
    with pytest.raises(ProblemFileError, match=message):
        problem_from_json({**LINE, **patch})


def test_hermitian_check_on_load():
    obj = problem_to_json(four_point_sa())
    obj["values"]["alpha"][0][1] = [0.3, 0.0]
    with pytest.raises(ProblemFileError, match="alpha.*Hermitian"):
        problem_from_json(obj)


def test_json_syntax_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "space": {"kind": "complex"},\n  oops\n}')
    with pytest.raises(ProblemFileError, match="line 3"):
        load_problem(path)
    with pytest.raises(ProblemFileError):
        load_problem(tmp_path / "missing.json")


def test_result_round_trip_recomputes_L(tmp_path):
    cases = [
        (_as_sequence(four_point_example()), coordinatewise_extend),
        (four_point_sa(), lambda f: extend_sa(f, 500, seed=2)),
        (random_instance(SpaceDescriptor.real_sup(1), make_rng(3)), mcshane_extend),
    ]
    for f, run in cases:
        res = run(f)
        path = tmp_path / "r.json"
        write_json(result_to_json(f, res), path)
        _, back = load_result(path)
        assert abs(back.achieved_L - res.achieved_L) <= 1e-12 * max(res.achieved_L, 1)
        assert back.method == res.method


def test_result_missing_assignment():
    f = four_point_example()
    obj = result_to_json(f, coordinatewise_extend(f))
    del obj["assignment"]["mu"]
    with pytest.raises(ProblemFileError, match="mu"):
        result_from_json(obj)


# --- CLI ---------------------------------------------------------------------


def test_cli_constants(capsys):
    assert main(["constants", "--space", "mn-sa", "--n", "2"]) == 0
    assert "1.6666666667" in capsys.readouterr().out
    assert main(["constants", "--space", "complex"]) == 0
    assert "1.2732395447" in capsys.readouterr().out
    assert main(["constants", "--space", "mn", "--n", "1"]) == 2
    assert "--space complex" in capsys.readouterr().err
    assert main(["constants", "--space", "nonsense"]) == 2
    assert main(["constants"]) == 2


def test_cli_constants_table(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["constants", "--all", "--max-n", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert set(rows[0]) == {"space", "n", "value", "kind", "provenance"}
    sa2 = [r for r in rows if r["space"] == "mn-sa(2)" and r["kind"] == "exact"]
    assert float(sa2[0]["value"]) == 5 / 3


def test_cli_extend_line(tmp_path, capsys):
    prob = _write(tmp_path, "line.json", LINE)
    out = tmp_path / "r.json"
    assert main(["extend", "--problem", prob, "--method", "mcshane", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["assignment"]["1"] == [0.5]
    assert res["achieved_L"] == 0.5


def test_cli_extend_four_point_preserve_norm(tmp_path):
    prob = _write(tmp_path, "fp.json", problem_to_json(_as_sequence(four_point_example())))
    out = tmp_path / "r.json"
    assert main(["extend", "--problem", prob, "--method", "coordinatewise", "--preserve-norm", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["achieved_sup"] == 1.0


def test_cli_extend_projection(tmp_path):
    prob = _write(tmp_path, "sa.json", problem_to_json(four_point_sa()))
    out = tmp_path / "r.json"
    assert main(["extend", "--problem", prob, "--method", "projection", "--nodes", "4000", "--seed", "1",
                 "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["ratio"] <= 5 / 3 + 0.1
    assert res["metadata"]["nodes"] == 4000 and res["metadata"]["seed"] == 1
    _, back = load_result(out)
    assert abs(back.achieved_L - res["achieved_L"]) <= 1e-12


def test_cli_extend_errors(tmp_path, capsys):
    line = _write(tmp_path, "line.json", LINE)
    sa = _write(tmp_path, "sa.json", problem_to_json(four_point_sa()))
    assert main(["extend", "--problem", line, "--method", "projection", "--seed", "1"]) == 2
    assert main(["extend", "--problem", sa, "--method", "mcshane"]) == 2
    assert main(["extend", "--problem", sa, "--method", "projection", "--nodes", "3", "--seed", "1"]) == 2
    assert main(["extend", "--problem", sa, "--method", "projection"]) == 2
    err = capsys.readouterr().err
    assert "--seed is required" in err and "n^2" in err
    with pytest.raises(SystemExit) as exc:
        main(["extend", "--problem", line, "--method", "magic"])
    assert exc.value.code == 2


def test_cli_oracle(tmp_path, capsys):
    assert main(["oracle", "--builtin", "four-point"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["ratio"] == pytest.approx(2 / np.sqrt(3), abs=1e-3)
    assert main(["oracle", "--builtin", "four-point", "--tol", "1e-6"]) == 0
    tight = json.loads(capsys.readouterr().out)
    assert tight["hi"] - tight["lo"] <= res["hi"] - res["lo"]
    prob = _write(tmp_path, "line.json", LINE)
    assert main(["oracle", "--problem", prob]) == 0
    assert json.loads(capsys.readouterr().out)["ratio"] == pytest.approx(1, abs=1e-4)
    assert main(["oracle"]) == 2


def test_cli_verify_suites(capsys):
    assert main(["verify", "--suite", "pnorm-quad", "--n", "3"]) == 0
    assert "2.375 vs expected 2.375" in capsys.readouterr().out
    assert main(["verify", "--suite", "lemma71", "--n", "2", "--samples", "1000000", "--seed", "3"]) == 0
    assert main(["verify", "--suite", "retraction", "--space", "euclid", "--k", "5", "--seed", "1"]) == 0
    assert main(["verify", "--suite", "retraction", "--space", "seq-sup", "--k", "2", "--seed", "1"]) == 0
    assert main(["verify", "--suite", "haar-mean", "--seed", "1"]) == 0
    assert main(["verify", "--suite", "pc-mc", "--n", "2", "--seed", "1"]) == 0
    assert main(["verify", "--suite", "averaging", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("ALL PASS") == 6


def test_cli_verify_failure_exit_code(capsys):
    # ten samples cannot pin the mean to 5e-3
    assert main(["verify", "--suite", "haar-mean", "--n", "2", "--samples", "10", "--seed", "0"]) == 1
    assert "VERIFICATION FAILED" in capsys.readouterr().out


def test_cli_verify_requires_seed(capsys):
    assert main(["verify", "--suite", "lemma71", "--n", "2"]) == 2
    assert "--seed" in capsys.readouterr().err


def test_cli_prospect(tmp_path):
    out = tmp_path / "p.csv"
    inst = tmp_path / "best.json"
    assert main(["prospect", "--space", "complex", "--trials", "50", "--seed", "1", "--out", str(out),
                 "--instance-out", str(inst)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert float(rows[0]["ratio"]) >= 1.1537
    assert max(float(r["ratio"]) for r in rows) <= 4 / np.pi + 1e-3
    assert load_problem(inst).target == SpaceDescriptor.complex_plane()
    assert main(["prospect", "--space", "seq-sup", "--k", "2", "--trials", "30", "--seed", "1",
                 "--out", str(out)]) == 0
    assert max(float(r["ratio"]) for r in csv.DictReader(out.open())) <= 1.0002
    assert main(["prospect", "--space", "complex", "--trials", "5"]) == 2


def test_cli_report_omega(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["report", "omega", "--max-n", "500", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,le_mn_sa,omega,omega_minus_2_over_e"
    first = lines[1].split(",")
    assert [float(x) for x in first[:3]] == [1, 1, 1] and first[3].startswith("0.2642")
    last = [float(x) for x in lines[-1].split(",")]
    assert last[0] == 500 and abs(last[3]) < 5e-4


def test_cli_outputs_are_byte_identical(tmp_path):
    paths = []
    for i in range(2):
        p = tmp_path / f"p{i}.csv"
        main(["prospect", "--space", "mn-sa", "--n", "2", "--trials", "20", "--seed", "9", "--out", str(p)])
        paths.append(p.read_bytes())
        prob = _write(tmp_path, "sa.json", problem_to_json(four_point_sa()))
        r = tmp_path / f"r{i}.json"
        main(["extend", "--problem", prob, "--method", "projection", "--nodes", "300", "--seed", "4", "--out", str(r)])
        paths.append(r.read_bytes())
    assert paths[0] == paths[2] and paths[1] == paths[3]


def test_thread_cap(monkeypatch):
    from lipext.cli import UsageError, worker_count

    monkeypatch.setenv("LIPEXT_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count(None) == 1
    monkeypatch.setenv("LIPEXT_THREADS", "x")
    with pytest.raises(UsageError):
        worker_count(2)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lipext", "constants", "--space", "mn-sa", "--n", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "2.3750000000" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "lipext", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
