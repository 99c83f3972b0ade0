import csv
import json

import numpy as np
import pytest

from consfem.fileio import evaluate_exported, export_solution, read_vtk, write_csv, write_json
from consfem.mesh import MeshError, crisscross_mesh
from consfem.solver import make_spaces
from consfem.verification import random_quadratic_field


def test_vtk_roundtrip_determines_the_field(tmp_path, rng):
    mesh = crisscross_mesh(2)
    vs, ps = make_spaces(mesh)
    u = rng.normal(size=vs.dim)
    p = rng.normal(size=ps.dim)
    path = tmp_path / "sol.vtk"
    export_solution(path, vs, u, ps, p)
    data = read_vtk(path)
    assert data["points"].shape == (6 * mesh.num_cells, 2)
    assert data["cells"].shape == (4 * mesh.num_cells, 3)
    cells = rng.integers(0, mesh.num_cells, 25)
    bary = rng.dirichlet(np.ones(3), 25)
    expected = np.array([vs.values_at(u, b)[0][c, 0] for c, b in zip(cells, bary)])
    np.testing.assert_allclose(evaluate_exported(data, cells, bary), expected, atol=1e-13)
    pex = np.einsum("na,na->n", p.reshape(-1, 3)[cells], bary)
    np.testing.assert_allclose(evaluate_exported(data, cells, bary, "pressure"), pex, atol=1e-13)


def test_vtk_of_interpolated_quadratic(tmp_path):
    mesh = crisscross_mesh(2)
    vs, _ = make_spaces(mesh)
    u = random_quadratic_field(np.random.default_rng(0))
    path = tmp_path / "q.vtk"
    export_solution(path, vs, vs.interpolate(u))
    data = read_vtk(path)
    np.testing.assert_allclose(data["velocity"], u(data["points"]), atol=1e-11)


def test_vtk_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.vtk"
    path.write_text("# vtk DataFile Version 3.0\nx\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 3 double\n0 0 0\n")
    with pytest.raises(MeshError, match="bad.vtk"):
        read_vtk(path)
    path.write_text("hello\n")
    with pytest.raises(MeshError, match="bad.vtk:1"):
        read_vtk(path)


def test_reports_serialise_numpy_and_nonfinite(tmp_path):
    path = tmp_path / "r.json"
    write_json(path, {"a": np.float64(1.5), "b": np.arange(3), "c": float("inf"), "d": np.bool_(True)})
    assert json.loads(path.read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": "inf", "d": True}
    rows = [{"level": 0, "err": 0.5}, {"level": 1, "rate": None, "ok": True}]
    write_csv(tmp_path / "e.csv", rows)
    with open(tmp_path / "e.csv") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["level", "err", "rate", "ok"]
    assert table[2] == ["1", "", "", "true"]
