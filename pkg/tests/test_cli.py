import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fairdegrade import Dataset, ProtectedGroups, write_csv
from fairdegrade.cli import main
from fairdegrade.experiment import ROW_FIELDS, RunConfig, run_experiment

GOLDEN = Path(__file__).parent / "golden"
FOUR = ["--data", "builtin:four_points", "--features", "x", "--group", "group"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_four_points_report_matches_golden(capsys):
    code, out, err = run_cli(capsys, "run", *FOUR, "--k", "2", "--epsilon", "100")
    assert code == 0
    assert out == (GOLDEN / "four_points_k2.json").read_text(encoding="utf-8")
    assert "100.00" in err and "1.0000" in err


def test_report_is_byte_identical_across_runs(capsys):
    first = run_cli(capsys, "run", *FOUR, "--k", "2", "--seed", "7")[1]
    second = run_cli(capsys, "run", *FOUR, "--k", "2", "--seed", "7")[1]
    assert first == second


def test_report_fields(capsys):
    rep = json.loads(run_cli(capsys, "run", *FOUR, "--k", "2")[1])
    assert rep["schema_version"] == 1
    assert set(ROW_FIELDS) <= set(rep)
    assert rep["config"]["epsilon"] == 40  # default 10 * n
    assert rep["pre_balance"] == 1.0 and rep["post_balance"] == 0.0
    assert rep["percent_decrease"] == 100.0
    assert sum(rep["per_center_counts"]) == rep["cost"] == 33
    assert rep["cost_fraction"] == 33 / 4


def test_already_minimal_row(capsys):
    code, out, _ = run_cli(capsys, "run", "--data", "builtin:segregated", "--features", "x",
                           "--group", "group", "--k", "2")
    rep = json.loads(out)
    assert code == 0
    assert rep["status"] == "already_minimal"
    assert rep["percent_decrease"] == "-"
    assert rep["cost"] == 0


@pytest.mark.parametrize(
    "argv, code",
    [
        (["--k", "2", "--epsilon", "10"], 2),
        (["--k", "1"], 4),
        (["--k", "2", "--epsilon", "-3"], 4),
        (["--k", "9"], 4),
        (["--k", "2", "--subsample", "50"], 4),
    ],
)
def test_exit_codes(capsys, argv, code):
    got, _, err = run_cli(capsys, "run", *FOUR, *argv)
    assert got == code
    if code >= 3:
        assert err.startswith("fairdegrade: ")
        assert len(err.strip().splitlines()) == 1


def test_data_errors_exit_3(capsys, tmp_path):
    assert run_cli(capsys, "run", "--data", str(tmp_path / "nope.csv"), "--features", "x",
                   "--group", "group", "--k", "2")[0] == 3
    assert run_cli(capsys, "run", *FOUR[:2], "--features", "y", "--group", "group", "--k", "2")[0] == 3


def test_budget_exhausted_report(capsys):
    code, out, _ = run_cli(capsys, "run", *FOUR, "--k", "2", "--epsilon", "10")
    rep = json.loads(out)
    assert code == 2
    assert rep["status"] == "budget_exhausted"
    assert rep["per_center_counts"] == [0, 0]
    assert rep["post_balance"] == rep["pre_balance"]


def test_csv_output(capsys, tmp_path):
    dest = tmp_path / "r.csv"
    code, out, _ = run_cli(capsys, "run", *FOUR, "--k", "2", "--format", "csv", "--out", str(dest))
    assert code == 0 and out == ""
    rows = list(csv.reader(io.StringIO(dest.read_text(encoding="utf-8"))))
    assert rows[0] == ROW_FIELDS
    rec = dict(zip(rows[0], rows[1]))
    assert float(rec["pre_balance"]) == 1.0
    assert float(rec["cost_fraction"]) == 8.25
    assert rec["wall_time_s"] == "-"


def test_timing_flag_records_wall_time(capsys):
    rep = json.loads(run_cli(capsys, "run", *FOUR, "--k", "2", "--timing")[1])
    assert rep["wall_time_s"] >= 0


def test_batch_doubling_flag_same_report_numbers(capsys):
    a = json.loads(run_cli(capsys, "run", *FOUR, "--k", "2")[1])
    b = json.loads(run_cli(capsys, "run", *FOUR, "--k", "2", "--batch-doubling")[1])
    assert a["per_center_counts"] == b["per_center_counts"]


def _third_dataset(tmp_path, rng):
    pts = np.vstack([rng.normal(0, 1, size=(10, 2)), rng.normal(8, 1, size=(10, 2))])
    path = tmp_path / "blobs.csv"
    write_csv(path, Dataset(pts, ("a", "b")), ProtectedGroups(np.arange(20) % 2), group_column="group")
    return path


def test_grid_three_datasets(capsys, tmp_path, rng):
    blobs = _third_dataset(tmp_path, rng)
    grid_doc = {
        "defaults": {"group": "group", "k": [2, 3, 4]},
        "runs": [
            {"data": "builtin:four_points", "features": "x"},
            {"data": "builtin:segregated", "features": "x"},
            {"data": str(blobs), "features": ["a", "b"]},
        ],
    }
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps(grid_doc), encoding="utf-8")
    code, out, _ = run_cli(capsys, "grid", str(cfg), "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert len(rows) == 9
    assert [r["k"] for r in rows] == ["2", "3", "4"] * 3
    assert [r["dataset"] for r in rows[::3]] == ["four_points", "segregated", "blobs"]
    assert all(r["error"] == "" for r in rows)


def test_grid_failing_dataset_adds_error_row(capsys, tmp_path, rng):
    blobs = _third_dataset(tmp_path, rng)
    grid_doc = {
        "defaults": {"group": "group", "k": [2, 3, 4]},
        "runs": [
            {"data": "builtin:four_points", "features": "x"},
            {"data": str(blobs), "features": ["a", "b"]},
            {"data": str(tmp_path / "missing.csv"), "features": "x", "k": 2},
            {"data": "builtin:segregated", "features": "x", "k": [2, 3]},
        ],
    }
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps(grid_doc), encoding="utf-8")
    code, out, _ = run_cli(capsys, "grid", str(cfg))
    runs = json.loads(out)["runs"]
    assert code == 0
    assert len(runs) == 9
    errors = [r for r in runs if r["error"]]
    assert len(errors) == 1 and errors[0]["dataset"] == "missing"
    assert errors[0]["status"] == "error"
    assert runs.index(errors[0]) == 6


def test_grid_bad_config_exits_4(capsys, tmp_path):
    cfg = tmp_path / "grid.json"
    cfg.write_text("{not json", encoding="utf-8")
    assert run_cli(capsys, "grid", str(cfg))[0] == 4
    cfg.write_text(json.dumps({"runs": [{"data": "x", "features": "x", "group": "g", "k": 2, "bogus": 1}]}))
    assert run_cli(capsys, "grid", str(cfg))[0] == 4


def test_default_subsample_caps_rows(tmp_path, rng):
    pts = rng.normal(size=(2100, 2))
    path = tmp_path / "big.csv"
    write_csv(path, Dataset(pts, ("a", "b")), ProtectedGroups(np.arange(2100) % 2), group_column="g")
    cfg = RunConfig(data=str(path), features=("a", "b"), group="g", k=2, epsilon=0)
    res = run_experiment(cfg)
    assert res.n == 2000 and res.subsample == 2000


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "fairdegrade", "run", *FOUR, "--k", "2", "--format", "csv"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == ",".join(ROW_FIELDS)
