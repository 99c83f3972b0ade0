import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consfem.assembly import (
    Operators,
    assemble_convection,
    assemble_convection_derivative,
    assemble_coriolis,
    assemble_div,
    assemble_gradgrad,
    assemble_load,
    assemble_mass,
    assemble_pressure_load,
    assemble_pressure_mass,
    assemble_symgrad,
    build_system,
    convection_jacobian,
)
from consfem.mesh import build_triangulation, crisscross_mesh, perturbed_mesh
from consfem.space import PressureSpace, TaylorHoodSpace, VelocitySpace


def _const(a, b):
    return lambda X: np.tile([a, b], (len(X), 1))


@pytest.fixture
def free_reference():
    mesh = build_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    return VelocitySpace(mesh, dirichlet=[])


@pytest.fixture(params=["npp", "th"])
def square_space(request):
    mesh = perturbed_mesh(crisscross_mesh(2), 0.2, seed=1)
    if request.param == "npp":
        return VelocitySpace(mesh, dirichlet=[])
    return TaylorHoodSpace(mesh, dirichlet=[])


def test_reference_stiffness_of_x_squared(free_reference):
    u = free_reference.interpolate(lambda X: np.column_stack([X[:, 0] ** 2, 0 * X[:, 0]]))
    assert u @ assemble_gradgrad(free_reference) @ u == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_mass_of_constant(square_space):
    u = square_space.interpolate(_const(1.0, 0.0))
    assert u @ assemble_mass(square_space) @ u == pytest.approx(1.0, rel=1e-12)


def test_divergence_pairing(square_space):
    pspace = square_space.pressure if isinstance(square_space, TaylorHoodSpace) else PressureSpace(square_space.mesh)
    B = assemble_div(square_space, pspace)
    u = square_space.interpolate(lambda X: np.column_stack([X[:, 0], 0 * X[:, 0]]))
    one = np.ones(pspace.dim)
    assert one @ B @ u == pytest.approx(1.0, rel=1e-12)


def test_symmetry_and_semidefiniteness(square_space):
    for A in (assemble_gradgrad(square_space), assemble_mass(square_space), assemble_symgrad(square_space)):
        assert abs(A - A.T).max() < 1e-12
        assert np.linalg.eigvalsh(A.toarray()).min() > -1e-10


def test_rigid_motions_in_symgrad_kernel(square_space):
    E = assemble_symgrad(square_space)
    for field in (_const(1.0, 0.0), _const(0.0, 1.0), lambda X: np.column_stack([-X[:, 1], X[:, 0]])):
        u = square_space.interpolate(field)
        assert np.abs(E @ u).max() < 1e-12


@given(st.floats(-3, 3))
def test_coriolis_is_skew(omega):
    space = VelocitySpace(crisscross_mesh(2), dirichlet=[])
    C = assemble_coriolis(space, omega)
    assert abs(C + C.T).max() <= 1e-12 * max(1, abs(omega))


def test_pressure_mass(crisscross):
    P = assemble_pressure_mass(PressureSpace(crisscross))
    one = np.ones(12)
    assert one @ P @ one == pytest.approx(1.0)


def test_loads_against_exact_integrals(square_space):
    # (f, phi) for f = (1, 0) paired with the interpolant of (1, 0) is |Omega|
    F = assemble_load(square_space, _const(1.0, 0.0))
    u = square_space.interpolate(_const(1.0, 0.0))
    assert F @ u == pytest.approx(1.0, rel=1e-12)
    G = assemble_pressure_load(PressureSpace(square_space.mesh), lambda X: X[:, 0])
    assert G.sum() == pytest.approx(0.5, rel=1e-12)


def _random_state(space, seed):
    return np.random.default_rng(seed).normal(size=space.dim)


@pytest.mark.parametrize("skew", [False, True])
def test_convection_jacobian_matches_finite_differences(square_space, skew):
    u = _random_state(square_space, 0)
    du = _random_state(square_space, 1)

    def residual(v):
        return assemble_convection(square_space, v, skew=skew) @ v

    h = 1e-6
    fd = (residual(u + h * du) - residual(u - h * du)) / (2 * h)
    J = convection_jacobian(square_space, u, skew=skew)
    np.testing.assert_allclose(J @ du, fd, atol=1e-6 * np.abs(fd).max())


def test_convection_parts(square_space):
    u = _random_state(square_space, 2)
    v = _random_state(square_space, 3)
    # N(u) v = N'(v) u, both equal to the trilinear form ((u . grad) v, .)
    lhs = assemble_convection(square_space, u) @ v
    rhs = assemble_convection_derivative(square_space, v) @ u
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * np.abs(lhs).max())


def test_skew_convection_is_skew(square_space):
    N = assemble_convection(square_space, _random_state(square_space, 4), skew=True)
    assert abs(N + N.T).max() < 1e-12


def test_build_system_validation(crisscross):
    v, p = VelocitySpace(crisscross), PressureSpace(crisscross)
    with pytest.raises(ValueError, match="unknown scheme"):
        build_system("euler", 1.0, v, p)
    with pytest.raises(ValueError, match="singular"):
        build_system("stokes", 0.0, v, p)
    with pytest.raises(ValueError, match="eps2 = 0"):
        build_system("darcy", 1.0, v, p)
    with pytest.raises(ValueError, match="non-negative"):
        build_system("brinkman", -1.0, v, p)
    ops = Operators.assemble(v, p)
    sys = build_system("brinkman", 0.25, v, p, ops=ops)
    assert abs(sys.A - (0.25 * ops.K + ops.M)).max() < 1e-15
