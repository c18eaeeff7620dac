from __future__ import annotations

import json

import pytest

from conedex.catalog import model_b
from conedex.cli import EXIT_CONFIG, EXIT_INDETERMINATE, EXIT_OK, main
from conedex.model import dumps_config

GRID = ["--grid-nodes", "400", "--grid-decades", "3"]


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_models_lists_catalog(capsys):
    code, out, _ = _run(capsys, ["models"])
    assert code == EXIT_OK
    names = [m["name"] for m in json.loads(out)["results"]["models"]]
    assert names == ["MODEL-A", "MODEL-B", "MODEL-C", "MODEL-D"]


def test_bspec_json(capsys):
    code, out, _ = _run(capsys, ["bspec", "MODEL-B"])
    roots = json.loads(out)["results"]["roots"]
    assert code == EXIT_OK
    assert [r["root"] for r in roots["plus"]] == [-0.75, 0.75]
    assert all(r["order"] == 1 and r["nullity"] == 1 for r in roots["minus"])


def test_defect_csv(capsys):
    code, out, _ = _run(capsys, ["defect", "--model", "MODEL-D", "--alphas=-2,-1,1,2"])
    assert code == EXIT_OK
    assert out.splitlines() == ["alpha,defect", "-2.0,4", "-1.0,2", "1.0,-2", "2.0,-4"]


def test_sweep_csv_columns(capsys):
    code, out, _ = _run(capsys, ["sweep", "MODEL-B", "--alphas=-1,-0.2,0.2,1", *GRID])
    lines = out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "alpha,dim_ker,dim_coker,index,gap_ratio,grid_nodes"
    assert [int(r.split(",")[3]) for r in lines[1:]] == [2, 0, 0, -2]


def test_index_report_has_breakdown(capsys):
    code, out, _ = _run(capsys, ["index", "MODEL-B", "--alpha", "1", *GRID])
    rep = json.loads(out)["results"]["reports"][0]
    assert code == EXIT_OK
    assert rep["breakdown"] == {"alpha": 1.0, "boundary": 0, "defect": -2, "total": -2}
    assert len(rep["refinements"]) == 3


def test_reports_are_byte_identical(capsys, tmp_path):
    argv = ["verify", "MODEL-B", "--alpha", "1", "--seed", "5", *GRID]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["passed"] and rep["checks"]


def test_config_file_with_inline_model(capsys, tmp_path):
    cfg = tmp_path / "model.json"
    cfg.write_text(dumps_config(model_b(0.5)))
    code, out, _ = _run(capsys, ["bspec", "--config", str(cfg)])
    assert code == EXIT_OK
    assert [r["root"] for r in json.loads(out)["results"]["roots"]["plus"]] == [-0.5, 0.5]


def test_experiment_config(capsys, tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"model": "MODEL-B", "params": {"b": 0.75}, "alphas": [-1.0, 1.0]}))
    code, out, _ = _run(capsys, ["defect", "--config", str(cfg), "--format", "json"])
    assert code == EXIT_OK
    assert json.loads(out)["results"]["defect"] == [{"alpha": -1.0, "defect": 2}, {"alpha": 1.0, "defect": -2}]


@pytest.mark.parametrize("argv", [
    ["index", "MODEL-Q", "--alpha", "1"],
    ["index", "MODEL-B", "--alpha", "0.75"],
    ["index", "MODEL-B"],
    ["index", "MODEL-B", "--alpha", "1", "--grid-nodes", "50"],
    ["nullspace", "MODEL-B", "--alphas=-1,1"],
])
def test_config_errors_exit_4(capsys, argv):
    code, _, err = _run(capsys, argv)
    assert code == EXIT_CONFIG
    assert json.loads(err.splitlines()[0])["error"] == "config"


def test_bad_config_file(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"model": "MODEL-B", "colour": 1}))
    assert _run(capsys, ["bspec", "--config", str(cfg)])[0] == EXIT_CONFIG
    assert _run(capsys, ["bspec", "--config", str(tmp_path / "missing.json")])[0] == EXIT_CONFIG


def test_indeterminate_exit_3(capsys):
    code, _, err = _run(capsys, ["index", "MODEL-B", "--alpha", "1", "--tol-gap", "1e30", *GRID])
    assert code == EXIT_INDETERMINATE
    assert json.loads(err.splitlines()[0])["error"] == "indeterminate"
