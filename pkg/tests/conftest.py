import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings
from hypothesis import strategies as st

from consfem.mesh import build_triangulation, crisscross_mesh, structured_square_mesh

settings.register_profile(
    "consfem", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("consfem")


def triangle_area(p):
    return 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))


@st.composite
def triangles(draw, min_area=0.05):
    """Counterclockwise triangles in [-1, 1]^2 bounded away from degeneracy."""
    coords = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
    p = np.array([[draw(coords), draw(coords)] for _ in range(3)])
    a = triangle_area(p)
    assume(abs(a) >= min_area)
    return p if a > 0 else p[[0, 2, 1]]


@st.composite
def barycentric(draw):
    a = draw(st.floats(0.0, 1.0))
    b = draw(st.floats(0.0, 1.0 - a))
    return np.array([a, b, 1.0 - a - b])


@pytest.fixture
def reference_mesh():
    return build_triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])


@pytest.fixture
def two_cell_mesh():
    return structured_square_mesh(1, "same")


@pytest.fixture
def crisscross():
    return crisscross_mesh(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
