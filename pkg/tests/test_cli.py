import json
import os
import subprocess
import sys

import numpy as np
import pytest

from pneumann import cli
from pneumann.errors import InvalidParameterError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_expression_factors():
    fn = cli.parse_expression("data: 2*(1+|x|)^-1*cos(theta)")
    X = np.array([[1.0, 0.0], [0.0, 3.0], [-1.0, 0.0]])
    np.testing.assert_allclose(fn(X), [1.0, 0.0, -1.0], atol=1e-15)
    ind = cli.parse_expression("sign(y)*1{|x|<2}")
    np.testing.assert_allclose(ind(np.array([[0.0, 1.0], [0.0, -1.0], [0.0, 5.0]])), [1.0, -1.0, 0.0])


def test_parse_expression_rejects_unknown_factor():
    with pytest.raises(InvalidParameterError):
        cli.parse_expression("tan(theta)")


def test_mesh_gen_and_inspect(tmp_path, capsys):
    path = tmp_path / "ann.json"
    code, _, _ = run(["mesh", "gen", "--annulus", "1", "4", "--res", "4", "16", "-o", str(path)], capsys)
    assert code == 0 and path.exists()
    code, out, _ = run(["mesh", "inspect", str(path)], capsys)
    assert code == 0 and json.loads(out)["problems"] == []
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["mesh", "inspect", str(bad)], capsys)[0] == cli.EXIT_PARSE


def test_solve_exit_codes(capsys):
    base = ["solve", "--annulus", "1", "4", "--res", "8", "32", "--outer-marker", "free"]
    code, _, err = run(base + ["--h", "1"], capsys)
    assert code == cli.EXIT_UNBOUNDED and "(F,1)" in err
    code, out, _ = run(base + ["--h", "cos(theta)", "--gauge", "mean_zero"], capsys)
    assert code == 0 and out.startswith("converged")
    assert run(base + ["--h", "tan(theta)"], capsys)[0] == cli.EXIT_INVALID


def test_classify_examples(capsys):
    code, out, _ = run(["classify", "--radial", "--n", "2", "--p", "2"], capsys)
    assert code == 0 and out.strip() == "parabolic"
    code, out, _ = run(["classify", "--radial", "--n", "2", "--p", "1.5"], capsys)
    assert code == 0 and out.strip() == "hyperbolic"


def test_reports_are_atomic_and_deterministic(tmp_path, capsys):
    docs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        argv = ["classify", "--radial", "--n", "3", "--p", "2", "--R", "2,4,8,16,32",
                "--test-mode", "--out", str(out)]
        assert run(argv, capsys)[0] == 0
        assert sorted(os.listdir(out)) == ["classify.json", "classify_trend.csv"]  # no temporaries left
        doc = json.loads((out / "classify.json").read_text())
        doc["arguments"].pop("out")
        docs.append(doc)
    assert docs[0] == docs[1]
    assert docs[0]["schema_version"] and docs[0]["result"]["verdict"] == "hyperbolic"


def test_reproduce_example32(tmp_path, capsys):
    code, out, _ = run(["reproduce", "example32", "--out", str(tmp_path)], capsys)
    assert code == 0 and "[PASS]" in out
    assert (tmp_path / "example32.csv").exists()


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "pneumann.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "pneumann" in res.stdout
