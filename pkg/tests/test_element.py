import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consfem.element import (
    LOCAL_DOFS,
    NORMAL_MEAN,
    P2_COEFFICIENTS,
    TANGENT_MEAN,
    basis_coefficients,
    dof_functionals,
    dof_matrix,
    eval_basis,
    eval_basis_divergence,
    eval_basis_gradient,
    eval_scalar_p1,
    eval_scalar_p2,
    monomials,
)
from consfem.mesh import triangle_geometry
from consfem.verification import random_quadratic_field

from conftest import barycentric, triangles

REFERENCE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _edge_midpoint(i):
    b = np.full(3, 0.5)
    b[i] = 0.0
    return b


def _to_bary(p, x):
    A = np.vstack([p.T, np.ones(3)])
    return np.linalg.solve(A, np.append(x, 1.0))


def test_local_dof_layout():
    assert [d.index for d in LOCAL_DOFS] == list(range(12))
    assert LOCAL_DOFS[3].name == "tangent-mean"


@pytest.mark.parametrize("i", range(3))
def test_midpoint_values_on_reference(i):
    g = triangle_geometry(REFERENCE)
    phi = eval_basis(g, _edge_midpoint(i))
    assert phi[4 * i + NORMAL_MEAN] @ g.normals[i] == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(phi[4 * i + TANGENT_MEAN], 1.5 * g.tangents[i], atol=1e-14)


@given(triangles())
def test_dual_basis(p):
    g = triangle_geometry(p)
    np.testing.assert_allclose(dof_matrix(g), np.eye(12), atol=1e-10)


@given(triangles(), st.integers(0, 2**32 - 1))
def test_quadratic_reproduction(p, seed):
    g = triangle_geometry(p)
    u = random_quadratic_field(np.random.default_rng(seed))
    coeffs = dof_functionals(g, u)
    rule = np.array([[0.6, 0.3, 0.1], [0.2, 0.2, 0.6], [1 / 3, 1 / 3, 1 / 3], [0.0, 0.5, 0.5]])
    x = rule @ p
    np.testing.assert_allclose(np.einsum("b,qbd->qd", coeffs, eval_basis(g, rule)), u(x), atol=1e-10)


@given(triangles(), barycentric())
def test_gradient_matches_finite_differences(p, bary):
    g = triangle_geometry(p)
    x = bary @ p
    G = eval_basis_gradient(g, bary)
    C = basis_coefficients(g)
    h = 1e-6
    for d in range(2):
        dx = np.zeros(2)
        dx[d] = h
        plus = np.einsum("bmc,m->bc", C, monomials(_to_bary(p, x + dx)))
        minus = np.einsum("bmc,m->bc", C, monomials(_to_bary(p, x - dx)))
        np.testing.assert_allclose((plus - minus) / (2 * h), G[:, :, d], atol=1e-5 * np.abs(G).max())


@given(triangles())
def test_divergence_is_constant_normal_flux(p):
    # div phi is linear; its mean equals the boundary flux over the area
    g = triangle_geometry(p)
    div = eval_basis_divergence(g, np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float))
    mean = div.mean(axis=0)
    flux = np.zeros(12)
    for i in range(3):
        flux[4 * i + NORMAL_MEAN] = g.lengths[i]
    np.testing.assert_allclose(mean * g.area, flux, atol=1e-10 * max(1, np.abs(mean).max()))


@given(triangles(), st.floats(-2, 2), st.floats(-2, 2))
def test_constant_field_functionals(p, a, b):
    g = triangle_geometry(p)
    f = dof_functionals(g, lambda X: np.tile([a, b], (len(X), 1)))
    for i in range(3):
        assert f[4 * i] == pytest.approx(g.normals[i] @ [a, b], abs=1e-14)
        assert f[4 * i + 1] == pytest.approx(0.0, abs=1e-14)
        assert f[4 * i + 2] == pytest.approx(0.0, abs=1e-14)
        assert f[4 * i + 3] == pytest.approx(g.tangents[i] @ [a, b], abs=1e-14)


def test_rejects_points_outside():
    g = triangle_geometry(REFERENCE)
    with pytest.raises(ValueError, match="barycentric"):
        eval_basis(g, [0.7, 0.7, -0.4])
    with pytest.raises(ValueError):
        eval_basis(g, [0.5, 0.5])


def test_rejects_degenerate_cell():
    g = triangle_geometry(REFERENCE)
    bad = dataclasses.replace(g, area=0.0)
    with pytest.raises(ValueError, match="degenerate"):
        basis_coefficients(bad)


def test_p2_nodal_property():
    nodes = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
    np.testing.assert_allclose(monomials(nodes) @ P2_COEFFICIENTS.T, np.eye(6), atol=1e-15)


@given(triangles(), barycentric())
def test_scalar_partition_of_unity(p, bary):
    g = triangle_geometry(p)
    v1, g1 = eval_scalar_p1(g, bary)
    v2, g2 = eval_scalar_p2(g, bary)
    assert v1.sum() == pytest.approx(1.0)
    assert v2.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(g1.sum(axis=0), 0.0, atol=1e-10 / g.area)
    np.testing.assert_allclose(g2.sum(axis=0), 0.0, atol=1e-10 / g.area)
