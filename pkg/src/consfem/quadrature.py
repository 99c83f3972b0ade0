"""Quadrature rules on the reference triangle and on edges.

Triangle rules are the fully symmetric Xiao--Gimbutas rules shipped with
:mod:`modepy`; points are returned in barycentric coordinates and the weights
are normalised to the area of the reference triangle (0, 0), (1, 0), (0, 1),
i.e. they sum to 1/2.  Edge rules are Gauss--Legendre rules on [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_TRIANGLE_DEGREE = 10


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a quadrature rule.

    For triangle rules ``points`` has shape ``(nq, 3)`` (barycentric
    coordinates); for edge rules it has shape ``(nq,)`` (parameter in [0, 1]).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def quadrature_triangle(degree: int) -> QuadratureRule:
    """Symmetric rule on the reference triangle exact for total degree `degree`."""
    if not 0 <= degree <= MAX_TRIANGLE_DEGREE:
        raise ValueError(
            f"unsupported triangle quadrature degree {degree}; "
            f"use 0..{MAX_TRIANGLE_DEGREE}"
        )
    import modepy

    rule = modepy.XiaoGimbutasSimplexQuadrature(max(degree, 1), 2)
    # modepy's unit triangle is (-1,-1), (1,-1), (-1,1) with area 2
    xy = (np.asarray(rule.nodes).T + 1.0) / 2.0
    bary = np.column_stack([1.0 - xy[:, 0] - xy[:, 1], xy[:, 0], xy[:, 1]])
    weights = np.asarray(rule.weights) / 4.0
    # the tabulated weights carry ~1e-15 drift; pin the sum exactly
    weights = weights * (0.5 / weights.sum())
    bary.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(bary, weights, degree)


@lru_cache(maxsize=None)
def quadrature_edge(degree: int) -> QuadratureRule:
    """Gauss--Legendre rule on [0, 1] exact for polynomials of degree `degree`."""
    if degree < 0:
        raise ValueError("edge quadrature degree must be non-negative")
    npts = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    s = (x + 1.0) / 2.0
    w = w / 2.0
    s.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(s, w, degree)
