"""Solution export (legacy ASCII VTK) and report serialisation."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .element import P2_COEFFICIENTS, monomials
from .mesh import MeshError, Triangulation, read_mesh, write_mesh

# Each cell is written as its three vertices and three edge midpoints (edge i
# opposite vertex i), split into four triangles.
_NODE_BARY = np.array(
    [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]], dtype=float
)
_SUBCELLS = np.array([[0, 5, 4], [5, 1, 3], [4, 3, 2], [3, 4, 5]])


def import_mesh(path) -> Triangulation:
    return read_mesh(path)


def export_mesh(mesh: Triangulation, path) -> None:
    write_mesh(mesh, path)


def _pressure_nodes(pspace, pressure: np.ndarray) -> np.ndarray:
    """Cellwise P1 pressure at the six output nodes of every cell, ``(nc, 6)``."""
    local = np.asarray(pressure, dtype=float)[pspace.cell_dofs]
    return local @ _NODE_BARY.T


def export_solution(path, vspace, velocity: np.ndarray, pspace=None, pressure=None,
                    title: str = "consfem solution") -> None:
    """Write velocity (and pressure) as point data on a subdivided point cloud.

    The discrete velocity is discontinuous, so points are duplicated per
    cell; values are exact point evaluations and the file therefore
    determines the cellwise quadratic velocity.
    """
    mesh = vspace.mesh
    nc = mesh.num_cells
    pts = np.einsum("qv,cvd->cqd", _NODE_BARY, mesh.geometry.vertices).reshape(-1, 2)
    vals, _ = vspace.values_at(velocity, _NODE_BARY)
    vel = vals.reshape(-1, 2)
    cells = (_SUBCELLS[None] + 6 * np.arange(nc)[:, None, None]).reshape(-1, 3)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in pts.tolist()]
    lines.append(f"CELLS {len(cells)} {4 * len(cells)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in cells.tolist()]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += ["5"] * len(cells)
    lines.append(f"POINT_DATA {len(pts)}")
    lines.append("VECTORS velocity double")
    lines += [f"{u!r} {v!r} 0.0" for u, v in vel.tolist()]
    if pressure is not None:
        pn = _pressure_nodes(pspace, pressure).reshape(-1)
        lines += ["SCALARS pressure double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(v)) for v in pn]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path) -> dict:
    """Parse a file written by :func:`export_solution`.

    Returns a dict with ``points`` ``(n, 2)``, ``cells`` ``(m, 3)`` and the
    point data arrays by name.  Errors carry the offending line number.
    """
    text = Path(path).read_text().splitlines()
    out: dict = {}
    i = 3
    n = len(text)

    def need(prefix):
        nonlocal i
        while i < n and not text[i].strip():
            i += 1
        if i >= n or not text[i].startswith(prefix):
            raise MeshError(f"{path}:{i + 1}: expected {prefix!r}")
        words = text[i].split()
        i += 1
        return words

    def rows(count, width, conv, where):
        nonlocal i
        if i + count > n:
            raise MeshError(f"{path}:{n}: file ends inside the {where} block")
        try:
            data = np.array([[conv(w) for w in text[i + r].split()[:width]] for r in range(count)])
        except ValueError as exc:
            raise MeshError(f"{path}: malformed {where} block near line {i + 1}: {exc}") from None
        i += count
        return data

    if len(text) < 4 or not text[0].startswith("# vtk"):
        raise MeshError(f"{path}:1: not a legacy VTK file")
    need("DATASET UNSTRUCTURED_GRID")
    npts = int(need("POINTS")[1])
    out["points"] = rows(npts, 2, float, "POINTS")
    ncells = int(need("CELLS")[1])
    out["cells"] = rows(ncells, 4, int, "CELLS")[:, 1:]
    need("CELL_TYPES")
    i += ncells
    need("POINT_DATA")
    while True:
        while i < n and not text[i].strip():
            i += 1
        if i >= n:
            break
        words = need("")
        if words[0] == "VECTORS":
            out[words[1]] = rows(npts, 2, float, words[1])
        elif words[0] == "SCALARS":
            need("LOOKUP_TABLE")
            out[words[1]] = rows(npts, 1, float, words[1])[:, 0]
        else:
            raise MeshError(f"{path}:{i}: unexpected section {words[0]!r}")
    return out


def evaluate_exported(data: dict, cells: np.ndarray, bary: np.ndarray, name: str = "velocity"):
    """Re-evaluate an exported field at points given by parent cell and bary.

    The six nodal values of each parent cell define its quadratic exactly.
    """
    vals = np.asarray(data[name]).reshape(-1, 6, *np.shape(data[name])[1:])
    basis = monomials(bary) @ P2_COEFFICIENTS.T  # (n, 6)
    return np.einsum("na,na...->n...", basis, vals[cells])


# ---------------------------------------------------------------------------
# reports


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(_plain(data), indent=2, sort_keys=False) + "\n")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10e}"
    return str(value)


def write_csv(path, rows: list[dict]) -> None:
    """One row per entry; columns in order of first appearance."""
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
