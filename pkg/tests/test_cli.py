import csv
import io
import json
import subprocess
import sys
from importlib import resources

import pytest

from commondue import cli
from commondue.instance import RawInstance, serialize_benchmark
from commondue.solver import SolverInvariantError

jsonschema = pytest.importorskip("jsonschema")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def bench_file(tmp_path):
    raws = [
        RawInstance((3, 5, 2, 4), (2, 1, 4, 3), (5, 2, 1, 6)),
        RawInstance((1, 4, 2, 2), (7, 1, 1, 2), (1, 3, 9, 4)),
        RawInstance((6, 1, 3, 2), (1, 5, 2, 2), (2, 2, 8, 3)),
    ]
    path = tmp_path / "bench.txt"
    path.write_text(serialize_benchmark(raws))
    return path


def schema():
    text = resources.files("commondue").joinpath("schemas/solve_report.schema.json").read_text()
    return json.loads(text)


def test_solve_inline_toy(capsys):
    code, out, _ = run(capsys, "solve", "--inline", "2;3 1 10;3 1 10", "--h", "1.0", "--method", "enum")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema())
    assert doc["runs"][0]["report"]["value"] == 3


@pytest.mark.parametrize("method", ["brute", "enum", "f1", "f2", "f3"])
def test_solve_json_validates(capsys, bench_file, method):
    code, out, _ = run(capsys, "solve", "--file", str(bench_file), "--index", "2", "--h", "1", "--method", method)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema())
    rep = doc["runs"][0]["report"]
    assert rep["optimal"] and rep["schedule"]["value"] == rep["value"]


def test_solve_csv_one_row_per_instance(capsys, bench_file):
    code, out, _ = run(capsys, "solve", "--file", str(bench_file), "--all", "--h", "0.2", "--method", "f3", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3
    assert list(rows[0]) == list(cli.SOLVE_FIELDS)
    assert [r["index"] for r in rows] == ["1", "2", "3"]


def test_h_grid_and_comma_lists(capsys, bench_file):
    code, out, _ = run(capsys, "solve", "--file", str(bench_file), "--index", "1", "--h", "0.2,0.4", "1", "--method", "enum", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["h"] for r in rows] == ["0.2", "0.4", "1"]
    assert [int(r["d"]) for r in rows] == [2, 5, 14]


@pytest.mark.parametrize("command", ["solve", "bench", "relax"])
def test_deterministic_output_is_byte_identical(capsys, command):
    argv = [command, "--random", "6", "--count", "2", "--seed", "7", "--h", "0.4", "1", "--deterministic"]
    if command == "relax":
        argv += ["--formulation", "F3", "--triangle"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second and first[0] == 0
    assert '"seconds": null' in first[1] or command == "bench"


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--inline", "2;3 1 10"],
        ["solve", "--file", "/no/such/file"],
        ["solve", "--inline", "1;2 1 1", "--h", "0"],
        ["solve", "--inline", "1;2 1 1", "--h", "abc"],
        ["solve", "--inline", "1;2 1 1", "--random", "3"],
        ["solve"],
        ["solve", "--inline", "3;1 1 1;1 1 1;5 1 1", "--h", "0.2", "--method", "f1"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err.startswith("commondue: error:")


def test_index_out_of_range(capsys, bench_file):
    code, _, err = run(capsys, "solve", "--file", str(bench_file), "--index", "4")
    assert code == 2 and "1..3" in err


def test_malformed_benchmark_file(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1\n2\n3 1 x\n")
    code, _, err = run(capsys, "solve", "--file", str(path))
    assert code == 2 and "position" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--method", "simplex"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--inline", "1;1 1 1", "--index", "1", "--all"])
    assert exc.value.code == 2


def test_internal_error_exit_3(capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverInvariantError("boom")

    monkeypatch.setattr(cli, "solve", broken)
    code, _, err = run(capsys, "solve", "--inline", "1;1 1 1")
    assert code == 3 and "boom" in err


def test_limit_hit_exit_1(capsys):
    code, out, _ = run(capsys, "bench", "--random", "20", "--seed", "3", "--h", "0.4", "--time-limit", "1", "--format", "csv")
    assert code == 1
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert int(row["#opt"]) == 0 and float(row["gap"]) > 0


def test_bench_unrestrictive_group(capsys):
    code, out, _ = run(capsys, "bench", "--random", "10", "--count", "3", "--seed", "1", "--h", "1", "--method", "f2", "--format", "json")
    assert code == 0
    (group,) = json.loads(out)["groups"]
    assert group["count"] == 3 and group["#opt"] == 3 and group["n"] == 10


def test_bench_empty_grid(capsys, bench_file):
    code, out, _ = run(capsys, "bench", "--file", str(bench_file), "--all", "--format", "table")
    assert code == 0
    assert out.split() == list(cli.BENCH_FIELDS)


def test_relax_single_task_gap_zero(capsys):
    code, out, _ = run(capsys, "relax", "--inline", "1;4 3 5", "--h", "0.2", "--formulation", "F3", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["runs"][0]["gap"] == 0 and doc["groups"][0]["avg_gap"] == 0


def test_relax_first_two_formulations_agree(capsys):
    bounds = []
    for form in ("F1", "F2"):
        _, out, _ = run(capsys, "relax", "--random", "7", "--count", "3", "--seed", "2", "--formulation", form)
        bounds.append([r["lower_bound"] for r in json.loads(out)["runs"]])
    assert bounds[0] == pytest.approx(bounds[1], abs=1e-6)


def test_relax_table_has_group_summary(capsys):
    code, out, _ = run(capsys, "relax", "--random", "5", "--count", "2", "--format", "table")
    assert code == 0 and "avg_gap" in out


def write_point(tmp_path, values):
    path = tmp_path / "point.json"
    path.write_text(json.dumps(values))
    return str(path)


def test_separate_feasible_point(capsys, tmp_path):
    # p = (2, 3), d = 10: task 1 ends at 7, task 2 at 10
    point = {"e_1": 3, "e_2": 0, "t_1": 0, "t_2": 0, "delta_1": 1, "delta_2": 1, "x_1_2": 0}
    code, out, _ = run(capsys, "separate", "--inline", "2;2 1 1;3 1 1", "--point", write_point(tmp_path, point), "--format", "table")
    assert code == 0 and out == "no violated cuts\n"


def test_separate_overlap_point(capsys, tmp_path):
    point = {"delta_1": 1, "delta_2": 1}
    code, out, _ = run(capsys, "separate", "--inline", "2;2 1 1;3 1 1", "--point", write_point(tmp_path, point))
    (cut,) = json.loads(out)["cuts"]
    assert code == 0 and cut["family"] == "S1" and cut["subset"] == "1 2" and cut["violation"] == 6


def test_separate_primed_and_triangle_families(capsys, tmp_path):
    point = {"x_1_2": 1, "x_1_3": 1, "x_2_3": 1, "delta_1": 0.5, "delta_2": 0.5, "delta_3": 0.5}
    code, out, _ = run(
        capsys, "separate", "--inline", "3;1 1 1;1 1 1;1 1 1", "--h", "1", "--formulation", "F2",
        "--point", write_point(tmp_path, point), "--format", "csv",
    )
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["family"] for r in rows] == ["TRIANGLE"]


@pytest.mark.parametrize("content", ["{not json", '{"nope": 1}', '{"e_1": "x"}', "[1, 2]", '"text"'])
def test_separate_malformed_point(capsys, tmp_path, content):
    path = tmp_path / "point.json"
    path.write_text(content)
    code, _, err = run(capsys, "separate", "--inline", "2;2 1 1;3 1 1", "--point", str(path))
    assert code == 2 and "error" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "commondue", "solve", "--inline", "2;3 1 10;3 1 10", "--method", "enum", "--format", "csv", "--deterministic"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].split(",")[5] == "3"
