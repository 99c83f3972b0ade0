import numpy as np
import pytest

from consfem.manufactured import boundary_layer, no_flow, smooth_vortex, traveling_wave

POINTS = np.array([[0.2, 0.3], [0.7, 0.55], [0.45, 0.9]])
H = 1e-4


def _d(fn, X, j, t=0.0):
    e = np.zeros(2)
    e[j] = H
    return (fn(X + e, t) - fn(X - e, t)) / (2 * H)


def _lap(fn, X, t=0.0):
    out = 0.0
    for j in range(2):
        e = np.zeros(2)
        e[j] = H
        out = out + (fn(X + e, t) - 2 * fn(X, t) + fn(X - e, t)) / H**2
    return out


def test_traveling_wave_forcing_by_finite_differences():
    eps2, t = 0.3, 0.4
    ms = traveling_wave(eps2)
    u, p = ms.u, ms.p
    ut = (u(POINTS, t + H) - u(POINTS, t - H)) / (2 * H)
    uv = u(POINTS, t)
    conv = uv[:, :1] * _d(u, POINTS, 0, t) + uv[:, 1:] * _d(u, POINTS, 1, t)
    gp = np.column_stack([_d(p, POINTS, 0, t), _d(p, POINTS, 1, t)])
    expected = ut + conv - eps2 * _lap(u, POINTS, t) + gp
    np.testing.assert_allclose(ms.f(POINTS, t), expected, atol=1e-5)
    np.testing.assert_allclose(ms.g(POINTS, t), 0.0, atol=1e-14)


def test_smooth_vortex_is_solenoidal_with_mean_free_pressure():
    ms = smooth_vortex()
    np.testing.assert_allclose(ms.g(POINTS), 0.0, atol=1e-13)
    x = (np.arange(200) + 0.5) / 200
    X = np.column_stack([np.repeat(x, 200), np.tile(x, 200)])
    assert ms.p(X).mean() == pytest.approx(0.0, abs=1e-4)
    edge = np.column_stack([np.zeros(5), np.linspace(0, 1, 5)])
    np.testing.assert_allclose(ms.u(edge), 0.0, atol=1e-14)


def test_no_flow_force_is_pressure_gradient():
    ms = no_flow(100.0)
    assert not ms.u(POINTS).any()
    y = POINTS[:, 1]
    np.testing.assert_allclose(ms.f(POINTS), np.column_stack([0 * y, 100 * (3 * y**2 - y + 1)]), rtol=1e-14)


def test_boundary_layer_small_eps_stays_finite():
    ms = boundary_layer(2.0**-10)
    X = np.array([[1.0, 1.0], [0.0, 0.0], [1e-3, 0.5]])
    assert np.all(np.isfinite(ms.f(X)))
    np.testing.assert_allclose(ms.g(POINTS), 0.0, atol=1e-12)


def test_frozen_solution_matches_parent():
    ms = traveling_wave(1.0)
    frozen = ms.at(0.7)
    np.testing.assert_array_equal(frozen.u(POINTS), ms.u(POINTS, 0.7))
    assert ms.transient and not smooth_vortex().transient
