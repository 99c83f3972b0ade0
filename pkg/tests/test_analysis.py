import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consfem.analysis import (
    aggregate_rate,
    broken_h1_seminorm,
    compute_errors,
    convergence_rates,
    estimate_inf_sup,
    estimate_korn,
    l2_norm,
)
from consfem.mesh import build_triangulation, crisscross_mesh
from consfem.space import PressureSpace, VelocitySpace
from consfem.verification import random_quadratic_field


def test_rate_of_quartered_error():
    assert convergence_rates([1.0, 0.5], [1.0, 0.25]) == [pytest.approx(2.0)]


def test_rate_from_published_layer_errors():
    # consecutive energy errors from the boundary-layer table
    assert convergence_rates([1 / 8, 1 / 16], [3.848e-02, 2.529e-02])[0] == pytest.approx(0.61, abs=5e-3)


def test_rate_edge_cases():
    assert convergence_rates([1.0, 0.5], [0.0, 1.0]) == [None]
    with pytest.raises(ValueError, match="decreasing"):
        convergence_rates([0.5, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="length"):
        convergence_rates([1.0], [1.0, 2.0])
    assert aggregate_rate([1.0], [1.0]) is None
    assert aggregate_rate([1.0, 0.5, 0.25], [1.0, 0.3, 1 / 16]) == pytest.approx(2.0)


@given(st.integers(0, 2**32 - 1))
def test_errors_vanish_for_reproduced_fields(seed):
    mesh = crisscross_mesh(2)
    vs = VelocitySpace(mesh)
    ps = PressureSpace(mesh)
    u = random_quadratic_field(np.random.default_rng(seed))
    h = 1e-6

    def grad(X):
        g = np.empty((len(X), 2, 2))
        for j in range(2):
            d = np.zeros(2)
            d[j] = h
            g[:, :, j] = (u(X + d) - u(X - d)) / (2 * h)
        return g

    err = compute_errors(vs, ps, vs.interpolate(u), np.zeros(ps.dim), u, grad, lambda X: 0 * X[:, 0])
    assert err.l2 < 1e-10 and err.h1 < 1e-7 and err.pressure == 0.0


def test_norms_of_known_fields(crisscross):
    vs = VelocitySpace(crisscross, dirichlet=[])
    u = vs.interpolate(lambda X: np.column_stack([X[:, 0], -X[:, 1]]))
    # ||(x, -y)||^2 = 2/3 and |grad|^2 = 2 on the unit square
    assert l2_norm(vs, u) == pytest.approx(np.sqrt(2 / 3), rel=1e-12)
    assert broken_h1_seminorm(vs, u) == pytest.approx(np.sqrt(2), rel=1e-12)


def _rigid(mesh, angle, shift):
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    return build_triangulation(mesh.vertices @ R.T + shift, mesh.cells)


@given(st.floats(0, 2 * np.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_inf_sup_invariant_under_rigid_motions(angle, sx, sy):
    mesh = crisscross_mesh(2)
    base = estimate_inf_sup(VelocitySpace(mesh), PressureSpace(mesh)).value
    moved = _rigid(mesh, angle, np.array([sx, sy]))
    value = estimate_inf_sup(VelocitySpace(moved), PressureSpace(moved)).value
    assert value == pytest.approx(base, rel=1e-8)


def test_constant_pressure_in_kernel_without_mean_constraint(crisscross):
    rep = estimate_inf_sup(VelocitySpace(crisscross), PressureSpace(crisscross, mean_zero=False))
    assert rep.info["smallest_eigenvalue"] < 1e-12


def test_korn_requires_dirichlet(crisscross):
    with pytest.raises(ValueError, match="Dirichlet"):
        estimate_korn(VelocitySpace(crisscross, dirichlet=[]))
    rep = estimate_korn(VelocitySpace(crisscross))
    assert 0 < rep.value <= 1.0 + 1e-12
