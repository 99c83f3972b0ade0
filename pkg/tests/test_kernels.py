import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consfem import kernels
from consfem.mesh import crisscross_mesh, perturbed_mesh
from consfem.quadrature import quadrature_triangle
from consfem.space import TaylorHoodSpace, VelocitySpace

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="compiled backend not built")


def _args(space, degree):
    rule = quadrature_triangle(degree)
    g = space.mesh.geometry
    return space.coefficients, g.grad_lambda, g.area, rule.points, rule.weights


def _spaces(seed):
    mesh = perturbed_mesh(crisscross_mesh(2), 0.25, seed=seed)
    return VelocitySpace(mesh, dirichlet=[]), TaylorHoodSpace(mesh, dirichlet=[])


def test_backend_reported():
    assert kernels.BACKEND in kernels.BACKENDS
    assert "python" in kernels.BACKENDS


@compiled
@given(st.integers(0, 500), st.sampled_from([0, 1]), st.integers(2, 8))
def test_backends_agree(seed, which, degree):
    space = _spaces(seed)[which]
    args = _args(space, degree)
    w = space.gather(np.random.default_rng(seed).normal(size=space.dim))
    for name, extra in (("gradgrad_local", ()), ("mass_local", ()),
                        ("convection_local", (w,)), ("convection_derivative_local", (w,))):
        fn = getattr(kernels, name)
        a = fn(*args, *extra, backend="python")
        b = fn(*args, *extra, backend="compiled")
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_python_kernels_match_einsum():
    space, _ = _spaces(0)
    C, gl, area, bary, w = _args(space, 4)
    vals = np.einsum("cbmi,qm->cqbi", C, np.stack(
        [bary[:, 0] ** 2, bary[:, 1] ** 2, bary[:, 2] ** 2, bary[:, 1] * bary[:, 2],
         bary[:, 2] * bary[:, 0], bary[:, 0] * bary[:, 1]], axis=-1))
    mass = np.einsum("q,c,cqai,cqbi->cab", w, 2 * area, vals, vals)
    np.testing.assert_allclose(kernels.mass_local(C, gl, area, bary, w, backend="python"), mass, atol=1e-14)


def test_environment_forces_python():
    env = dict(os.environ, CONSFEM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from consfem import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
