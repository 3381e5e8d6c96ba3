import json

import numpy as np

from geomseries import linalg
from geomseries.cli import main
from geomseries.slp import from_json, mul_count, passes_oracle


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_plan_writes_valid_program(tmp_path, capsys):
    out_path = str(tmp_path / "plan.json")
    code, out = run(capsys, "plan", "--n", "677", "--strategy", "auto", "--out", out_path)
    assert code == 0
    assert "muls=14" in out
    prog = from_json(open(out_path).read().strip())
    assert prog.series_length == 677
    assert mul_count(prog) == 14
    assert passes_oracle(prog)


def test_plan_json_format_carries_hash(capsys):
    code, out = run(capsys, "plan", "--n", "25", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["muls"] == 6
    assert len(doc["plan_sha256"]) == 64


def test_plan_deterministic_output(capsys):
    _, first = run(capsys, "plan", "--n", "96", "--format", "json")
    _, second = run(capsys, "plan", "--n", "96", "--format", "json")
    assert first == second


def test_verify_small_range_passes(capsys):
    code, out = run(capsys, "verify", "--min", "1", "--max", "48")
    assert code == 0
    assert "all pass" in out
    assert "fails oracle as designed" in out


def test_verify_json_report(tmp_path, capsys):
    out_path = str(tmp_path / "verify.json")
    code, _ = run(
        capsys, "verify", "--min", "20", "--max", "30", "--counts",
        "--format", "json", "--out", out_path,
    )
    assert code == 0
    doc = json.loads(open(out_path).read())
    assert doc["ok"] is True
    assert doc["failures"] == []
    assert {f["fixture"] for f in doc["fixtures"]} == {"flawed-length-11", "flawed-length-26"}
    auto26 = [r for r in doc["counts"] if r["n"] == 26 and r["strategy"] == "auto"]
    assert auto26[0]["muls"] == 6


def test_verify_applies_strategy_filter(capsys):
    code, out = run(
        capsys, "verify", "--min", "25", "--max", "26", "--strategy", "auto",
        "--counts", "--format", "json",
    )
    assert code == 0
    doc = json.loads(out)
    assert [r["muls"] for r in doc["counts"]] == [6, 6]


def test_count_csv(capsys):
    code, out = run(
        capsys, "count", "--min", "25", "--max", "25",
        "--strategy", "auto", "--strategy", "binary", "--format", "csv",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "n,strategy,muls,predicted"
    assert lines[1].startswith("25,auto,6,")
    assert lines[2].startswith("25,binary,7,")


def test_markov_json(capsys):
    code, out = run(capsys, "markov", "--bases", "3,2", "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert rows[0]["stationary"] == ["1/10", "1/5", "1/5", "1/10", "1/5", "1/5"]
    assert abs(rows[0]["coefficient"] - 1.9245) < 1e-3


def test_markov_empirical_column(capsys):
    code, out = run(
        capsys, "markov", "--bases", "3,2", "--empirical", "300",
        "--nmin", "1000", "--nmax", "100000", "--seed", "5", "--format", "json",
    )
    assert code == 0
    row = json.loads(out)[0]
    assert abs(row["empirical"] - 1.92) < 0.05
    assert row["empirical_stderr"] > 0


def test_markov_deterministic(capsys):
    args = ("markov", "--bases", "5,2", "--format", "json")
    _, first = run(capsys, *args)
    _, second = run(capsys, *args)
    assert first == second


def test_asymptotic_json(capsys):
    code, out = run(capsys, "asymptotic", "--digits", "14", "--floor-levels", "5")
    assert code == 0
    doc = json.loads(out)
    assert doc["k"] == "1.50283680104976"
    assert doc["coefficient"] == "1.70158214004473"
    assert all(row["match"] for row in doc["floor_identity"])
    assert len(doc["floor_identity"]) == 6


def test_invert_round_trip(tmp_path, capsys):
    a = linalg.random_test_matrix(20, seed=6)
    src = str(tmp_path / "a.csv")
    dst = str(tmp_path / "inv.csv")
    linalg.save_matrix_csv(src, a)
    code, out = run(
        capsys, "invert", src, "--terms", "9", "--strategy", "auto", "--out", dst,
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["matrix_muls"] == 4
    a_hat = linalg.load_matrix_csv(dst)
    direct, _ = linalg.neumann_invert(a, 9, strategy="direct")
    assert np.linalg.norm(a_hat - direct, "fro") <= 1e-10


def test_invert_direct_strategy_counts(tmp_path, capsys):
    a = linalg.random_test_matrix(20, seed=6)
    src = str(tmp_path / "a.csv")
    linalg.save_matrix_csv(src, a)
    code, out = run(capsys, "invert", src, "--terms", "9", "--strategy", "direct")
    assert code == 0
    assert json.loads(out)["matrix_muls"] == 7


def test_invert_divergent_exit_code(tmp_path, capsys):
    src = str(tmp_path / "hot.csv")
    linalg.save_matrix_csv(src, np.array([[3.0]]))
    code, _ = run(capsys, "invert", src, "--terms", "5")
    assert code == 1
    code, out = run(capsys, "invert", src, "--terms", "5", "--allow-divergent")
    assert code == 0
    assert json.loads(out)["spectral_radius_est"] >= 1.0


def test_bench_csv_shape(capsys):
    code, out = run(
        capsys, "bench", "--sizes", "16", "--terms", "5,8", "--replicates", "2",
    )
    assert code == 0
    lines = out.strip().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["size", "terms", "direct_muls", "fast_muls"]
    assert "speedup_median" in header
    cells = [line.split(",") for line in lines[1:]]
    assert [c[0] for c in cells] == ["16", "16"]
    assert [c[2] for c in cells] == ["3", "6"]
    assert [c[3] for c in cells] == ["2", "4"]
