import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consfem.quadrature import MAX_TRIANGLE_DEGREE, quadrature_edge, quadrature_triangle


def _bary_moment(a, b, c):
    # integral of l0^a l1^b l2^c over the reference triangle
    return 2 * 0.5 * math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 2)


@pytest.mark.parametrize("degree", range(MAX_TRIANGLE_DEGREE + 1))
def test_triangle_weights_and_points(degree):
    rule = quadrature_triangle(degree)
    assert rule.measure == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-14)
    assert np.all(rule.points > -1e-14)


@pytest.mark.parametrize("degree", range(MAX_TRIANGLE_DEGREE + 1))
def test_triangle_exact_for_all_monomials(degree):
    rule = quadrature_triangle(degree)
    b = rule.points
    for a in range(degree + 1):
        for c in range(degree + 1 - a):
            val = rule.weights @ (b[:, 1] ** a * b[:, 2] ** c)
            assert val == pytest.approx(_bary_moment(0, a, c), rel=1e-13, abs=1e-16)


def test_squared_bubble_moment():
    # 2|T| 2! 2! / 6!
    rule = quadrature_triangle(4)
    val = rule.weights @ (rule.points[:, 1] ** 2 * rule.points[:, 2] ** 2)
    assert val == pytest.approx(1.0 / 180.0, rel=1e-14)


def test_unsupported_degree():
    with pytest.raises(ValueError, match="unsupported"):
        quadrature_triangle(MAX_TRIANGLE_DEGREE + 1)
    with pytest.raises(ValueError):
        quadrature_edge(-1)


@given(st.integers(0, 20), st.integers(0, 20))
def test_edge_rule_exact(degree, power):
    rule = quadrature_edge(degree)
    assert rule.measure == pytest.approx(1.0, rel=1e-15)
    if power <= degree:
        assert rule.weights @ rule.points**power == pytest.approx(1.0 / (power + 1), rel=1e-13)
