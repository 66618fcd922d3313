import json

import numpy as np
import pytest

from cpquad.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def three_items(tmp_path):
    p = tmp_path / "three.json"
    p.write_text(json.dumps({"n": 3, "sense": "pack", "objective": {"type": "linear", "u": [3, 2, 1]},
                             "constraints": [{"Q": np.ones((3, 3)).tolist(), "C": 2, "U": [[1], [1], [1]]}]}))
    return str(p)


def test_gen_is_deterministic(capsys):
    a = run(capsys, "gen", "--n", "6", "--m", "1", "--rank", "2", "--seed", "1")
    b = run(capsys, "gen", "--n", "6", "--m", "1", "--rank", "2", "--seed", "1")
    assert a[0] == 0 and a[1] == b[1]
    assert json.loads(a[1])["n"] == 6


def test_gen_different_seeds_differ(capsys):
    a = run(capsys, "gen", "--n", "6", "--seed", "1")[1]
    b = run(capsys, "gen", "--n", "6", "--seed", "2")[1]
    assert a != b


def test_solve_pack_lin_with_oracle(capsys, three_items):
    code, out, _ = run(capsys, "solve", "pack-lin", "--input", three_items, "--epsilon", "0.25", "--oracle")
    d = json.loads(out)
    assert code == 0 and d["oracle_ratio"] >= 0.5 and d["subset"] == [0, 1]
    assert d["record"]["epsilon"] == 0.25 and len(d["record"]["digest"]) == 64


def test_unknown_flag(capsys):
    code, out, err = run(capsys, "gen", "--n", "3", "--bogus")
    assert code == 2 and out == "" and "usage" in err


def test_validation_error_exit(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"n": 2, "sense": "pack", "objective": {"type": "linear", "u": [1, 1]},
                             "constraints": [{"Q": [[1, 0.5], [0, 1]], "C": 1}]}))
    code, _, err = run(capsys, "solve", "pack-lin", "--input", str(p))
    assert code == 2 and "error" in err


def test_cover_infeasible_exit(capsys, tmp_path):
    p = tmp_path / "cover.json"
    p.write_text(json.dumps({"n": 2, "sense": "cover", "objective": {"type": "linear", "u": [1, 1]},
                             "constraints": [{"Q": [[1, 1], [1, 1]], "C": 5, "U": [[1], [1]]}]}))
    code, out, _ = run(capsys, "solve", "cover-lin", "--input", str(p))
    assert code == 1 and json.loads(out)["feasible"] is False
    code, out, _ = run(capsys, "oracle", "--input", str(p))
    assert code == 1


def test_factorize_matrix(capsys, tmp_path):
    p = tmp_path / "q.json"
    p.write_text(json.dumps({"Q": [[2, 1], [1, 2]]}))
    code, out, _ = run(capsys, "factorize", "--input", str(p), "--rank", "2", "--shift", "1e-6")
    d = json.loads(out)
    U = np.array(d["U"])
    assert code == 0 and d["dominates"] and np.all(U >= 0)
    assert np.max(np.abs(U @ U.T - np.array([[2, 1], [1, 2]]))) <= 1e-6


def test_factorize_rank_error(capsys, tmp_path):
    p = tmp_path / "q.json"
    p.write_text(json.dumps({"Q": np.eye(3).tolist()}))
    assert run(capsys, "factorize", "--input", str(p), "--rank", "1")[0] == 2


def test_oracle_and_pareto(capsys, tmp_path):
    p = tmp_path / "two.json"
    p.write_text(json.dumps({"n": 2, "sense": "pack", "objective": {"type": "product", "a": [[1, 0], [0, 1]]},
                             "constraints": [{"Q": [[1, 1], [1, 1]], "C": 1, "U": [[1], [1]]}]}))
    code, out, _ = run(capsys, "oracle", "--input", str(p), "--pareto")
    assert code == 0 and sorted(pt["subset"] for pt in json.loads(out)) == [[0], [1]]
    code, out, _ = run(capsys, "pareto", "--input", str(p), "--oracle")
    assert code == 0 and json.loads(out)["uncovered"] == []


def test_bench_empty_suite(capsys):
    code, out, _ = run(capsys, "bench", "--suite", "pack-lin", "--count", "0")
    assert code == 0 and json.loads(out) == []


def test_bench_csv(capsys):
    code, out, _ = run(capsys, "bench", "--suite", "pack-lin", "--count", "2", "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 3 and "ratio" in lines[0]


def test_bench_cover_rows_within_bound(capsys):
    code, out, _ = run(capsys, "bench", "--suite", "cover-lin", "--count", "3")
    rows = json.loads(out)
    assert code == 0 and all(r["ratio"] <= r["bound"] for r in rows)


def test_threads_do_not_change_values(capsys, three_items):
    one = json.loads(run(capsys, "solve", "pack-lin", "--input", three_items, "--threads", "1")[1])
    four = json.loads(run(capsys, "solve", "pack-lin", "--input", three_items, "--threads", "4")[1])
    assert one["subset"] == four["subset"] and one["value"] == four["value"]
