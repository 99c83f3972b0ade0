import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consfem.mesh import crisscross_mesh, fan_mesh, forward_step_mesh, perturbed_mesh, structured_square_mesh
from consfem.quadrature import quadrature_edge
from consfem.space import (
    PointLocator,
    PressureSpace,
    TaylorHoodSpace,
    VelocitySpace,
    evaluate_field,
    evaluate_points,
)
from consfem.verification import random_quadratic_field


def test_dimensions(two_cell_mesh, crisscross):
    v = VelocitySpace(two_cell_mesh)
    assert v.dim == 20 and v.num_free == 4
    assert VelocitySpace(crisscross).num_free == 16
    assert VelocitySpace(crisscross, dirichlet=[]).num_free == 32
    assert PressureSpace(two_cell_mesh).dim == 6
    assert PressureSpace(crisscross).dim == 12


def test_partial_dirichlet():
    mesh = forward_step_mesh(1)
    space = VelocitySpace(mesh, dirichlet=["inflow", "wall"])
    outflow = mesh.edges_with_tags(["outflow"])
    assert not space.constrained[space.edge_dofs[outflow]].any()
    with pytest.raises(ValueError, match="unknown boundary tag"):
        VelocitySpace(mesh, dirichlet=["lid"])


def test_taylor_hood_dimensions(crisscross):
    th = TaylorHoodSpace(crisscross)
    assert th.dim == 2 * (crisscross.num_vertices + crisscross.num_edges)
    assert th.pressure.dim == crisscross.num_vertices
    # only the center node is free
    assert th.num_free == 2 * (1 + len(crisscross.interior_edges))


def test_pressure_mean_constraint(crisscross):
    p = PressureSpace(crisscross)
    assert p.mean_constraint.sum() == pytest.approx(1.0)
    th = TaylorHoodSpace(crisscross)
    assert th.pressure.mean_constraint.sum() == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_global_quadratic_reproduction(seed):
    mesh = perturbed_mesh(crisscross_mesh(2), 0.2, seed=seed % 1000)
    space = VelocitySpace(mesh)
    u = random_quadratic_field(np.random.default_rng(seed))
    coeffs = space.interpolate(u)
    pts = np.random.default_rng(seed + 1).uniform(0.01, 0.99, (20, 2))
    np.testing.assert_allclose(evaluate_points(space, coeffs, pts), u(pts), atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_normal_continuity(seed, s):
    # any coefficient vector has a continuous normal component
    mesh = perturbed_mesh(crisscross_mesh(2), 0.2, seed=seed % 1000)
    space = VelocitySpace(mesh, dirichlet=[])
    coeffs = np.random.default_rng(seed).normal(size=space.dim)
    for e in mesh.interior_edges:
        a, b = mesh.vertices[mesh.edges[e]]
        x = (1 - s) * a + s * b
        n = mesh.edge_normals[e]
        vals = []
        for c in mesh.edge_cells[e]:
            bary = np.linalg.solve(np.vstack([mesh.vertices[mesh.cells[c]].T, np.ones(3)]), np.append(x, 1))
            vals.append(evaluate_field(space, coeffs, int(c), np.clip(bary, 0, 1)).value @ n)
        assert abs(vals[0] - vals[1]) <= 1e-11 * max(1, np.abs(coeffs).max())


def test_edge_means_match_global_dofs():
    # both cells see the same normal and tangential means on a shared edge
    mesh = fan_mesh(5)
    space = VelocitySpace(mesh, dirichlet=[])
    coeffs = np.random.default_rng(0).normal(size=space.dim)
    rule = quadrature_edge(5)
    for e in mesh.interior_edges:
        a, b = mesh.vertices[mesh.edges[e]]
        for c in mesh.edge_cells[e]:
            A = np.vstack([mesh.vertices[mesh.cells[c]].T, np.ones(3)])
            bary = [np.clip(np.linalg.solve(A, np.append((1 - r) * a + r * b, 1)), 0, 1) for r in rule.points]
            vals = np.array([evaluate_field(space, coeffs, int(c), q).value for q in bary])
            assert rule.weights @ (vals @ mesh.edge_normals[e]) == pytest.approx(coeffs[4 * e], abs=1e-12)
            assert rule.weights @ (vals @ mesh.edge_tangents[e]) == pytest.approx(coeffs[4 * e + 3], abs=1e-12)


def test_boundary_values_follow_tags():
    mesh = structured_square_mesh(3, "same")
    space = VelocitySpace(mesh)
    lid = lambda X: np.tile([1.0, 0.0], (len(X), 1))  # noqa: E731
    g = space.boundary_values({"top": lid})
    top = mesh.edges_with_tags(["top"])
    assert np.abs(g[space.edge_dofs[top][:, 3]]).min() == pytest.approx(1.0)
    others = np.setdiff1d(mesh.boundary_edges, top)
    assert not g[space.edge_dofs[others]].any()
    with pytest.raises(ValueError, match="non-Dirichlet"):
        VelocitySpace(mesh, dirichlet=["top"]).boundary_values({"left": lid})


def test_point_locator_outside(crisscross):
    cells, bary = PointLocator(crisscross)(np.array([[0.3, 0.6], [1.5, 0.5]]))
    assert cells[0] >= 0 and cells[1] == -1
    np.testing.assert_allclose(bary[0] @ crisscross.vertices[crisscross.cells[cells[0]]], [0.3, 0.6])
    out = evaluate_points(VelocitySpace(crisscross), np.zeros(32), np.array([[2.0, 2.0]]))
    assert np.isnan(out).all()


def test_taylor_hood_reproduces_quadratics():
    mesh = crisscross_mesh(2)
    th = TaylorHoodSpace(mesh)
    u = random_quadratic_field(np.random.default_rng(5))
    pts = np.random.default_rng(6).uniform(0, 1, (10, 2))
    np.testing.assert_allclose(evaluate_points(th, th.interpolate(u), pts), u(pts), atol=1e-12)
