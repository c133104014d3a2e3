import csv
import json

import pytest

from decgmg.cli import main
from decgmg.mesh import make_triangulated_grid, read_obj, write_obj


def _run(argv, capsys=None):
    return main([str(a) for a in argv])


def test_poisson_writes_outputs(tmp_path):
    out = tmp_path / "p"
    assert _run(["poisson", "--levels", 2, "--cycles", 4, "--seed", 1, "--out", out]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["seed"] == 1 and rep["iterations"] == 4
    assert "environment" in rep["config"]
    rows = list(csv.DictReader(open(out / "residuals.csv")))
    assert len(rows) == 4 and float(rows[-1]["rel_residual"]) < float(rows[0]["rel_residual"])
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["config"]["levels"] == 2


def test_poisson_timing_and_config_file(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"tower": {"levels": 2}, "solver": {"kind": "gmg", "plan": "v", "cycles": 2}, "output": {"dir": str(tmp_path / "o")}}))
    assert _run(["poisson", "--config", conf, "--timing"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "o" / "timing.csv")))
    assert [int(r["fine_vertices"]) for r in rows] == [81, 289]
    assert all(float(r["seconds_per_cycle"]) > 0 for r in rows)


@pytest.mark.parametrize("solver", ["direct", "cg", "gmg_pcg", "gmres"])
def test_poisson_solvers(tmp_path, solver):
    assert _run(["poisson", "--levels", 2, "--solver", solver, "--out", tmp_path]) == 0


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["poisson", "--scheme", "loop"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["poisson", "--levels", "0"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2


def test_missing_config_is_io_error(tmp_path):
    assert _run(["poisson", "--config", tmp_path / "nope.json"]) == 1


def test_invalid_config_is_validation_error(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"solver": {"colour": "red"}}))
    assert _run(["poisson", "--config", conf]) == 3
    assert "invalid config" in capsys.readouterr().err
    conf.write_text("{not json")
    assert _run(["poisson", "--config", conf]) == 3


def test_convection_and_reference(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"tower": {"levels": 1}, "convection": {"n_samples": 3}}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(["convection", "--config", conf, "--solver", "direct", "--tfinal", 0.001, "--out", a]) == 0
    assert _run(["convection", "--config", conf, "--tfinal", 0.001, "--out", b, "--reference", a]) == 0
    summary = json.loads((b / "summary.json").read_text())
    assert summary["walls_exact"] and summary["rmse_vs_reference"]["max"] < 1e-5
    rows = list(csv.DictReader(open(b / "rmse.csv")))
    assert len(rows) == 3 and rows[0]["log_plottable"] == "0"
    assert (a / "T_0002.csv").exists()
    # reference with different sample times
    c = tmp_path / "c"
    assert _run(["convection", "--config", conf, "--tfinal", 0.002, "--out", c, "--reference", a]) == 3


def test_convection_zero_time(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"tower": {"levels": 1}}))
    assert _run(["convection", "--config", conf, "--tfinal", 0, "--solver", "direct", "--out", tmp_path]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["sample_times"] == [0.0]


def test_mesh_generate_subdivide_inspect(tmp_path, capsys):
    g = tmp_path / "g.obj"
    assert _run(["mesh", "generate", "grid", 4, 4, "-o", g]) == 0
    assert read_obj(g).nv == 25
    f = tmp_path / "f.obj"
    assert _run(["mesh", "subdivide", g, "--times", 2, "--maps", "-o", f]) == 0
    assert read_obj(f).nv == 17 * 17
    assert (tmp_path / "f_map1.mtx").exists() and (tmp_path / "f_map2.mtx").exists()
    capsys.readouterr()
    assert _run(["mesh", "inspect", f, "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["vertices"] == 289 and info["valid"] and info["euler_characteristic"] == 1


def test_mesh_generate_large_grid(tmp_path):
    g = tmp_path / "big.obj"
    assert _run(["mesh", "generate", "grid", 128, 128, "-o", g]) == 0
    assert read_obj(g).nv == 16641


def test_cubic_subdivision(tmp_path):
    g = tmp_path / "g.obj"
    write_obj(make_triangulated_grid(2, 2), g)
    f = tmp_path / "f.obj"
    assert _run(["mesh", "subdivide", g, "--scheme", "cubic", "-o", f]) == 0
    assert read_obj(f).nv == 7 * 7


def test_bad_obj(tmp_path, capsys):
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0 0\nf 1 2 3\n")
    assert _run(["mesh", "inspect", bad]) == 3
    assert _run(["mesh", "subdivide", bad, "-o", tmp_path / "x.obj"]) == 3
    assert _run(["mesh", "inspect", tmp_path / "missing.obj"]) == 1
