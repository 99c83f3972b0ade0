import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consfem.mesh import (
    MeshError,
    build_triangulation,
    check_assumption_a,
    crisscross_mesh,
    extract_chain_patch,
    extract_macroelement,
    fan_mesh,
    forward_step_mesh,
    perturbed_mesh,
    read_mesh,
    refine,
    refine_uniform,
    structured_square_mesh,
    triangle_geometry,
    write_mesh,
)

from conftest import triangles


def test_reference_triangle_counts(reference_mesh):
    assert reference_mesh.num_edges == 3
    assert len(reference_mesh.interior_edges) == 0


def test_two_cell_square_counts(two_cell_mesh):
    assert two_cell_mesh.num_cells == 2
    assert two_cell_mesh.num_edges == 5
    assert len(two_cell_mesh.interior_edges) == 1


def test_crisscross_counts(crisscross):
    # four cells around the center: 4 sides plus 4 spokes
    assert crisscross.num_edges == 8
    assert len(crisscross.interior_edges) == 4


def test_refinement_of_one_cell(reference_mesh):
    fine = refine_uniform(reference_mesh)
    assert fine.num_cells == 4
    # two children per parent edge plus three interior edges
    assert fine.num_edges == 9
    assert fine.h == pytest.approx(reference_mesh.h / 2, rel=1e-15)


def test_structured_counts():
    assert structured_square_mesh(1, "same").num_cells == 2
    assert structured_square_mesh(43, "same").num_cells == 3698


def test_crisscross_n2_satisfies_assumption_a():
    mesh = crisscross_mesh(2)
    assert mesh.num_cells == 16
    assert check_assumption_a(mesh) == []


def test_assumption_a_violations(reference_mesh, two_cell_mesh, crisscross):
    assert check_assumption_a(reference_mesh) == [0]
    assert check_assumption_a(two_cell_mesh) == [0, 1]
    assert check_assumption_a(crisscross) == []


def test_reference_geometry():
    g = triangle_geometry([[0, 0], [1, 0], [0, 1]])
    assert g.area == 0.5
    # edge 0 is the hypotenuse
    np.testing.assert_allclose(g.normals[0], [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)
    assert g.lengths[0] == pytest.approx(np.sqrt(2), rel=1e-15)


@given(triangles())
def test_geometry_invariants(p):
    g = triangle_geometry(p)
    scale = 1.0 / g.area
    np.testing.assert_allclose(g.grad_lambda.sum(axis=0), 0.0, atol=1e-12 * scale)
    np.testing.assert_allclose(np.einsum("id,id->i", g.normals, g.tangents), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(g.normals, axis=1), 1.0, rtol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(g.tangents, axis=1), 1.0, rtol=1e-12)
    # n x t > 0
    assert np.all(g.normals[:, 0] * g.tangents[:, 1] - g.normals[:, 1] * g.tangents[:, 0] > 0)
    np.testing.assert_allclose(g.normals, -2 * g.area * g.grad_lambda / g.lengths[:, None], rtol=1e-12, atol=1e-12)
    # grad lambda_i has magnitude 1 / altitude_i
    altitude = 2 * g.area / g.lengths
    np.testing.assert_allclose(np.linalg.norm(g.grad_lambda, axis=1), 1 / altitude, rtol=1e-12)


@pytest.mark.parametrize(
    "mesh",
    [
        structured_square_mesh(3, "same"),
        structured_square_mesh(4, "alternating"),
        crisscross_mesh(3),
        forward_step_mesh(1),
        refine_uniform(crisscross_mesh(1)),
    ],
    ids=["same", "alternating", "crisscross", "step", "refined"],
)
def test_mesh_invariants(mesh):
    v = mesh.vertices[mesh.cells]
    signed = (v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1]) - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0])
    assert np.all(signed > 0)
    counts = np.bincount(mesh.cell_edges.ravel(), minlength=mesh.num_edges)
    assert set(counts.tolist()) <= {1, 2}
    np.testing.assert_array_equal(counts[mesh.interior_edges], 2)
    sides = {tuple(sorted((int(c[(i + 1) % 3]), int(c[(i + 2) % 3])))) for c in mesh.cells for i in range(3)}
    assert sides == {tuple(sorted(map(int, e))) for e in mesh.edges}
    # Euler relation for simply connected domains
    assert mesh.num_vertices - mesh.num_edges + mesh.num_cells == 1


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def test_refinement_preserves_tags():
    mesh = structured_square_mesh(2, "same")
    fine = refine_uniform(mesh)
    for e, tag in fine.boundary_tags.items():
        mid = fine.vertices[fine.edges[e]].mean(axis=0)
        parents = []
        for p in mesh.boundary_edges:
            a, b = mesh.vertices[mesh.edges[p]]
            t = np.dot(mid - a, b - a) / np.dot(b - a, b - a)
            if abs(_cross(b - a, mid - a)) < 1e-12 and 0 < t < 1:
                parents.append(p)
        assert len(parents) == 1
        assert mesh.boundary_tags[parents[0]] == tag


def test_refinement_keeps_assumption_a():
    # midpoints of interior parent edges are interior, so no new violations
    mesh = crisscross_mesh(2)
    assert check_assumption_a(refine(mesh, 2)) == []
    coarse = structured_square_mesh(2, "same")
    bad_fine = set(check_assumption_a(refine_uniform(coarse)))
    assert bad_fine <= {4 * c + k for c in check_assumption_a(coarse) for k in range(4)}


def test_macroelement_of_crisscross(crisscross):
    macro = extract_macroelement(crisscross, 4)
    assert macro.m == 4


def test_hexagon_macroelement():
    mesh = fan_mesh(6)
    macro = extract_macroelement(mesh, 0)
    assert macro.m == 6
    # consecutive cells share the listed edge and all edges meet the center
    for s in range(6):
        a, b = macro.cells[s - 1], macro.cells[s]
        assert mesh.edge_between(a, b) == macro.edges[s]
        assert 0 in mesh.edges[macro.edges[s]]


def test_macroelement_valence_matches_adjacency():
    mesh = refine_uniform(crisscross_mesh(1))
    for v in np.flatnonzero(~mesh.is_boundary_vertex):
        assert extract_macroelement(mesh, int(v)).m == len(mesh.cells_of_vertex(int(v)))


@given(st.integers(3, 9), st.integers(0, 10_000))
def test_macroelement_geometry_rederived(m, seed):
    mesh = fan_mesh(m, np.random.default_rng(seed), 0.4)
    macro = extract_macroelement(mesh, 0)
    for s, e in enumerate(macro.edges):
        a, b = mesh.vertices[mesh.edges[e]]
        assert macro.lengths[s] == pytest.approx(np.linalg.norm(b - a), rel=1e-12)
    for s, c in enumerate(macro.cells):
        p = mesh.vertices[mesh.cells[c]]
        area = 0.5 * abs(_cross(p[1] - p[0], p[2] - p[0]))
        assert macro.areas[s] == pytest.approx(area, rel=1e-12)


def test_boundary_vertex_has_no_macroelement(two_cell_mesh):
    with pytest.raises(MeshError):
        extract_macroelement(two_cell_mesh, 0)


def test_chain_patches(two_cell_mesh):
    chain = extract_chain_patch(two_cell_mesh, [0, 1])
    assert len(chain.interior_edges) == 1 and not chain.closed
    hexagon = fan_mesh(6)
    macro = extract_macroelement(hexagon, 0)
    fan = extract_chain_patch(hexagon, macro.cells[:4])
    assert len(fan.interior_edges) == 3 and not fan.closed
    triple = fan_mesh(3)
    closed = extract_chain_patch(triple, [0, 1, 2])
    assert closed.closed and len(closed.interior_edges) == 3


def test_invalid_input_rejected():
    with pytest.raises(MeshError, match="repeated"):
        build_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 1]])
    with pytest.raises(MeshError, match="zero-area"):
        build_triangulation([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])
    with pytest.raises(MeshError, match="not connected"):
        build_triangulation([[0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 6]], [[0, 1, 2], [3, 4, 5]])
    with pytest.raises(MeshError, match="dangling"):
        build_triangulation([[0, 0], [1, 0], [0, 1], [3, 3]], [[0, 1, 2]])


def test_clockwise_cells_reordered():
    mesh = build_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])
    assert mesh.geometry.area[0] == pytest.approx(0.5)


def test_mesh_file_roundtrip(tmp_path):
    mesh = forward_step_mesh(1)
    path = tmp_path / "step.mesh"
    write_mesh(mesh, path)
    back = read_mesh(path)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.cells, mesh.cells)
    assert sorted(back.boundary_tags.values()) == sorted(mesh.boundary_tags.values())


def test_mesh_file_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("nodes 3\n0 0\n1 0\n0 1\ncells 1\n0 1\nboundary 0\n")
    with pytest.raises(MeshError, match=r"bad.mesh:6"):
        read_mesh(path)


def test_perturbed_mesh_keeps_boundary():
    mesh = crisscross_mesh(3)
    moved = perturbed_mesh(mesh, 0.2, seed=3)
    b = mesh.is_boundary_vertex
    np.testing.assert_array_equal(moved.vertices[b], mesh.vertices[b])
    assert not np.allclose(moved.vertices[~b], mesh.vertices[~b])
