import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lipext.cli import estimate_payload, main, read_matrix
from lipext.metric import DataError
from lipext.spaces import SpaceSpec, generate_space, sample_queries

GOLDEN = Path(__file__).parent / "golden"
FAST = ["--threshold", "queries=400", "--threshold", "fd_queries=100",
        "--threshold", "w1_pairs=40", "--threshold", "lip_pairs=200",
        "--threshold", "w1_instances=10"]


def _csv(path, rows, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for r in np.atleast_2d(rows):
            fh.write(",".join(repr(float(v)) for v in r) + "\n")
    return str(path)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def segment(tmp_path):
    return (_csv(tmp_path / "x.csv", [[0.0], [1.0]]), _csv(tmp_path / "f.csv", [[0.0], [1.0]]),
            _csv(tmp_path / "q.csv", [[0.25], [0.5]], header=["y"]))


def test_extend_kernel_and_cells(segment, capsys):
    x, f, q = segment
    code, out, _ = _run(["extend", "--points", x, "--values", f, "--queries", q], capsys)
    assert code == 0
    assert out.splitlines() == ["f1", "0.0", "0.5"]
    code, out, _ = _run(["extend", "--points", x, "--values", f, "--queries", q,
                         "--method", "cells"], capsys)
    assert code == 0 and out.splitlines()[2] == "0.5"


def test_estimate_matches_library(tmp_path, capsys):
    X = generate_space(SpaceSpec("grid", 1, 8))
    path = _csv(tmp_path / "x.csv", X.points)
    code, out, _ = _run(["estimate", "--points", path], capsys)
    assert code == 0
    assert out == json.dumps(estimate_payload(X), indent=1, sort_keys=True) + "\n"
    one = _csv(tmp_path / "one.csv", [[0.3, 0.4]])
    code, out, _ = _run(["estimate", "--points", one], capsys)
    assert code == 0 and json.loads(out)["doubling"]["lambda_hat"] == 1


def test_extend_c1_affine_jet(tmp_path, capsys):
    X = generate_space(SpaceSpec("grid", 2, 4))
    A, b = np.array([[1.5, -0.5]]), np.array([0.25])
    jets = np.hstack([X.points @ A.T + b, np.broadcast_to(A, (len(X), 2))])
    Q = sample_queries(X, 50, seed=4)
    code, out, _ = _run(["extend-c1", "--points", _csv(tmp_path / "x.csv", X.points),
                         "--jets", _csv(tmp_path / "j.csv", jets),
                         "--queries", _csv(tmp_path / "q.csv", Q)], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "f1,df1_1,df1_2"
    vals = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    np.testing.assert_allclose(vals[:, 0], Q @ A[0] + b[0], atol=1e-10)
    np.testing.assert_allclose(vals[:, 1:], np.broadcast_to(A, (50, 2)), atol=1e-10)


def test_extend_c1_golden(capsys):
    argv = ["extend-c1", "--points", str(GOLDEN / "square_points.csv"),
            "--jets", str(GOLDEN / "square_jets.csv"),
            "--queries", str(GOLDEN / "square_queries.csv")]
    code, out, _ = _run(argv, capsys)
    assert code == 0
    assert out == (GOLDEN / "square_extend_c1.csv").read_text()
    # independent check inside the hull: spacing 1/16 bounds the error by 1/256
    q = read_matrix(str(GOLDEN / "square_queries.csv"), "queries")[:, 0]
    v = read_matrix(str(GOLDEN / "square_extend_c1.csv"), "output")[:, 0]
    inside = (q >= 0) & (q <= 1)
    assert np.all(np.abs(v[inside] - q[inside] ** 2) <= 1 / 256)


def test_jobs_do_not_change_output(tmp_path, capsys):
    X = generate_space(SpaceSpec("grid", 2, 4))
    f = np.random.default_rng(0).standard_normal((len(X), 2))
    Q = sample_queries(X, 200, seed=1)
    argv = ["extend", "--points", _csv(tmp_path / "x.csv", X.points),
            "--values", _csv(tmp_path / "f.csv", f), "--queries", _csv(tmp_path / "q.csv", Q),
            "--method", "cells"]
    outs = [_run(argv + extra, capsys)[1] for extra in ([], [], ["--jobs", "2"])]
    assert outs[0] == outs[1] == outs[2]


def test_grid_output(segment, capsys, tmp_path):
    x, f, _ = segment
    code, out, _ = _run(["grid", "--points", x, "--values", f, "--resolution", "5"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "x1,f1" and [ln.split(",")[1] for ln in lines[1:]] == \
        ["0.0", "0.0", "0.5", "1.0", "1.0"]
    cube = _csv(tmp_path / "c.csv", [[0, 0, 0], [1, 1, 1]])
    vals = _csv(tmp_path / "v.csv", [[0.0], [1.0]])
    assert _run(["grid", "--points", cube, "--values", vals], capsys)[0] == 1


def test_exit_codes(segment, tmp_path, capsys):
    x, f, q = segment
    assert _run([], capsys)[0] == 1
    assert _run(["frobnicate"], capsys)[0] == 1
    assert _run(["extend", "--points", x, "--values", f, "--queries", q, "--p", "1"], capsys)[0] == 1
    code, _, err = _run(["extend", "--points", str(tmp_path / "nope.csv"), "--values", f,
                         "--queries", q], capsys)
    assert code == 2 and "cannot read" in err
    three = _csv(tmp_path / "f3.csv", [[0.0], [1.0], [2.0]])
    assert _run(["extend", "--points", x, "--values", three, "--queries", q], capsys)[0] == 2
    far = _csv(tmp_path / "far.csv", [[1e9]])
    code, _, err = _run(["extend", "--points", x, "--values", f, "--queries", far,
                         "--method", "cells"], capsys)
    assert code == 2 and "query row 0" in err


def test_read_matrix_rejects_ragged(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(DataError):
        read_matrix(str(p), "points")


def test_verify_small(tmp_path, capsys):
    report = tmp_path / "r.json"
    argv = ["verify", "--instances", "grid-d1-n4", "--report", str(report), "--no-timing"] + FAST
    code, out, _ = _run(argv, capsys)
    lines = [ln for ln in out.splitlines() if ln.startswith("criterion")]
    assert len(lines) == 12
    assert code == (3 if any(" FAIL " in ln for ln in lines) else 0)
    data = json.loads(report.read_text())
    assert "timing" not in data and len(data["criteria"]) == 12
    code, _, _ = _run(argv + ["--threshold", "sum_tol=0"], capsys)
    assert code == 3
    assert _run(["verify", "--threshold", "bogus=1"], capsys)[0] == 2


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "lipext.cli", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "extend-c1" in res.stdout
