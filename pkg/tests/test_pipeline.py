import dataclasses
import json

import numpy as np
import pytest

from _oracles import helix_data
from lorentz_cmc.bjorling import data_to_singular_potential
from lorentz_cmc.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from lorentz_cmc.export import (cellmap_array, companion_csv_path, export_cellmap, export_obj,
                                read_pgm, report_json)
from lorentz_cmc.iwasawa import CellTag
from lorentz_cmc.loop_algebra import make_omega
from lorentz_cmc.pipeline import (ConfigError, classify_only, parse_config_dict, parse_config_text,
                                  run_pipeline)
from lorentz_cmc.potentials import GridSpec
from lorentz_cmc.surface import build_surface

HELIX = {"H": 1.0, "s": [1.0], "t": [1.0], "theta": [0.0, 1.0]}
SMALL_GRID = {"x_range": [-0.3, 0.3], "y_range": [-0.1, 0.1], "nx": 7, "ny": 5}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(p)


# ---------------------------------------------------------------------------
# configuration


def test_shorthand_config_defaults():
    cfg = parse_config_dict(HELIX)
    assert cfg.bjorling.s_coeffs == (1.0,) and cfg.bjorling.J == (-1.0, 1.0)
    g = cfg.grid_spec()
    assert (g.nx, g.ny) == (101, 31) and g.x_range == (-1.0, 1.0) and g.y_range == (-0.3, 0.3)
    assert cfg.numerics.N == 24 and cfg.lambda0 == (0.0,)
    assert cfg.lambda0_values() == [1.0]


def test_config_round_trip():
    cfg = parse_config_dict({**HELIX, "grid": SMALL_GRID, "lambda0": [0, 90],
                             "numerics": {"N": 16, "h_step": 0.005}})
    again = parse_config_text(json.dumps(cfg.to_dict()))
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()
    np.testing.assert_allclose(cfg.lambda0_values()[1], 1j)


@pytest.mark.parametrize("text,where", [
    ("", "empty"),
    ('{"H": 1, "H": 2, "s": [1], "t": [1], "theta": [0, 1]}', "duplicate key 'H'"),
    ('{"H": 1, "s": [1], "t": [1], "theta": [0, 1], "grid": {"nx": 1}}', "grid/nx"),
    ('{"H": 1, "s": [1], "t": [1], "theta": [0, 1], "colour": 3}', "colour"),
    ('{"H": -1, "s": [1], "t": [1], "theta": [0, 1]}', "H"),
    ('{"H": 1, "s": [0, 1], "t": [0, 1], "theta": [0, 1]}', "simultaneously"),
    ('{"H": 1, "s": [1], "t": [1], "theta": [0, 1], "numerics": {"N": 8, "M": 20}}', "numerics/M"),
    ('{"H": 1, "s": [1]', "invalid JSON"),
])
def test_config_errors_name_the_problem(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config_text(text)


# ---------------------------------------------------------------------------
# exports


@pytest.fixture(scope="module")
def helix_xi():
    return data_to_singular_potential(helix_data())


def read_obj(path):
    lines = open(path).read().splitlines()
    return [l for l in lines if l.startswith("v ")], [l for l in lines if l.startswith("f ")]


def test_obj_two_by_two(tmp_path, helix_xi):
    sg = build_surface(helix_xi, GridSpec((0.0, 0.1), (0.05, 0.15), 2, 2, basepoint=0.1j))
    v, f = read_obj(export_obj(sg, tmp_path / "a.obj"))
    assert len(v) == 4 and len(f) == 2
    bad = dataclasses.replace(sg, valid=np.array([[True, True], [True, False]]))
    v, f = read_obj(export_obj(bad, tmp_path / "b.obj"))
    assert len(v) == 3 and len(f) == 1
    assert f[0] == "f 1 2 3"


def test_cellmap_uniform_big_cell(tmp_path, helix_xi):
    sg = build_surface(helix_xi, GridSpec((0.0, 0.1), (0.0, 0.1), 3, 3))
    allplus = dataclasses.replace(sg, tag=np.full((3, 3), int(CellTag.BIG_CELL_PLUS), np.int8))
    img = read_pgm(export_cellmap(allplus, tmp_path / "u.pgm"))
    assert img.shape == (3, 3) and np.all(img == 255)


def test_helix_cellmap_has_single_singular_row(tmp_path, helix_xi):
    grid = GridSpec((-0.3, 0.3), (-0.1, 0.1), 13, 9)
    sg = build_surface(helix_xi, grid)
    img = read_pgm(export_cellmap(sg, tmp_path / "h.pgm"))
    row = grid.ny - 1 - grid.j_row          # image row 0 is the largest y
    assert np.all(img[row] == 128)
    rest = np.delete(img, row, axis=0)
    assert set(np.unique(rest)) <= {200, 255}
    # companion file lists exactly the singular-curve vertices
    export_obj(sg, tmp_path / "h.obj")
    rows = open(companion_csv_path(tmp_path / "h.obj")).read().splitlines()
    assert len(rows) == 1 + grid.nx


def test_omega2_initial_value_marks_basepoint(helix_xi):
    grid = GridSpec((-0.1, 0.1), (-0.1, 0.1), 5, 5)
    sg = build_surface(helix_xi, grid, phi0=make_omega(2))
    img = cellmap_array(sg)
    assert img[2, 2] == 64
    assert sg.tag[2, 2] == CellTag.P2 and not sg.valid[2, 2]


# ---------------------------------------------------------------------------
# pipeline and report


def test_classify_report_for_swallowtail():
    cfg = parse_config_dict({"H": 1.0, "s": [0.0, 1.0], "t": [1.0], "theta": [0.0, 1.0]})
    rep = classify_only(cfg)
    assert rep.status == "classified"
    rec = rep.record_for(0.0)
    assert rec["type"] == "Swallowtail"
    assert {r["type"] for r in rep.records if r["x0"] != 0.0} == {"CuspidalEdge"}
    json.loads(report_json(rep))


def test_degenerate_data_produce_no_surface():
    cfg = parse_config_dict({"H": 1.0, "s": [1.0], "t": [1.0], "theta": [0.4], "grid": SMALL_GRID})
    sg, rep = run_pipeline(cfg)
    assert sg is None and rep.status == "degenerate" and rep.degenerate
    assert all(r["type"] == "Degenerate" for r in rep.records)


def test_small_helix_pipeline():
    cfg = parse_config_dict({**HELIX, "grid": SMALL_GRID})
    sg, rep = run_pipeline(cfg)
    assert rep.status == "ok"
    assert rep.grid_stats["cell_counts"]["P1"] == 7
    assert rep.grid_stats["cell_counts"]["Unknown"] == 0
    assert rep.grid_stats["mean_curvature_error"] is None
    assert rep.provenance["config_hash"] == cfg.config_hash()


# ---------------------------------------------------------------------------
# command line


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, {**HELIX, "grid": SMALL_GRID})
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    for name in ("surface.obj", "surface.singular.csv", "cellmap.pgm", "curve.csv", "report.json"):
        assert (out / name).exists(), name
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "ok" and len(rep["records"]) == 7
    assert json.loads(capsys.readouterr().out)["status"] == "ok"


def test_cli_outputs_are_byte_identical_across_threads(tmp_path):
    cfg = write(tmp_path, {**HELIX, "grid": {"x_range": [-0.4, 0.4], "y_range": [-0.1, 0.1],
                                             "nx": 41, "ny": 21}})
    for n in (1, 3):
        assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / f"t{n}"),
                     "--threads", str(n)]) == EXIT_OK
    for name in ("surface.obj", "cellmap.pgm", "curve.csv", "report.json"):
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t3" / name).read_bytes()


def test_cli_lambda_sweep_suffixes(tmp_path):
    cfg = write(tmp_path, {**HELIX, "grid": SMALL_GRID, "lambda0": [0, 45]})
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    assert (out / "surface_lam0.obj").exists() and (out / "surface_lam45.obj").exists()


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", "--config", write(tmp_path, "")]) == EXIT_CONFIG
    assert main(["classify", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = write(tmp_path, {**HELIX, "grid": {"nx": 1}}, "bad.json")
    assert main(["validate", "--config", bad]) == EXIT_CONFIG
    assert "grid/nx" in capsys.readouterr().err


def test_cli_numerical_failure(tmp_path):
    # a = (-z + i)/4 vanishes at z = i, which is a grid point
    cfg = write(tmp_path, {"H": 1.0, "s": [0.0, 1.0], "t": [1.0], "theta": [0.0, 1.0],
                           "grid": {"x_range": [-1, 1], "y_range": [-1, 1], "nx": 5, "ny": 5}})
    assert main(["validate", "--config", cfg]) == EXIT_NUMERIC
    assert main(["run", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == EXIT_NUMERIC


def test_cli_classify_and_validate(tmp_path, capsys):
    cfg = write(tmp_path, {**HELIX, "grid": SMALL_GRID})
    assert main(["classify", "--config", cfg]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["status"] == "classified" and len(rep["records"]) == 7
    assert main(["validate", "--config", cfg]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["standard_potential_regular"] is True


def test_log_level_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LORENTZ_CMC_LOG_LEVEL", "debug")
    cfg = write(tmp_path, {**HELIX, "grid": SMALL_GRID})
    assert main(["classify", "--config", cfg]) == EXIT_OK


def test_report_records_follow_the_grid():
    # an even row count never samples y = 0, so there is no singular curve to report
    cfg = parse_config_dict({**HELIX, "grid": {"ny": 30, "nx": 11}})
    assert cfg.grid_spec().j_row is None
    assert classify_only(cfg).records == []
    cfg = parse_config_dict({**HELIX, "grid": {"nx": 2, "ny": 3}})
    recs = classify_only(cfg).records
    assert [r["x0"] for r in recs] == [-1.0, 1.0]


def test_mesh_vertex_count_equals_valid_samples(tmp_path, helix_xi):
    sg = build_surface(helix_xi, GridSpec((-0.3, 0.3), (-0.1, 0.1), 13, 9))
    v, f = read_obj(export_obj(sg, tmp_path / "m.obj"))
    assert len(v) == int(sg.valid.sum()) and len(f) == 2 * 12 * 8
