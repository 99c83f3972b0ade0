"""The 12-DOF quadratic vector element and the scalar Lagrange elements.

Every shape function on a cell is a quadratic polynomial in the barycentric
coordinates, so it is stored as coefficients with respect to the six
monomials::

    [l0**2, l1**2, l2**2, l1*l2, l2*l0, l0*l1]

(index ``3 + i`` is the product of the two coordinates that do not vanish on
edge ``i``).  The vector element has four degrees of freedom per edge ``i``,
ordered ``4*i + kind``:

0. mean of ``u.n_i`` over the edge,
1. mean of ``u.n_i * (l_j - l_k)``,
2. mean of ``u.n_i * (1/6 - l_j*l_k)``,
3. mean of ``u.t_i``,

with ``j = (i+1) % 3``, ``k = (i+2) % 3`` and ``n_i``, ``t_i`` the outward
normal and the counter-clockwise tangent of the cell.  The dual basis is
written in closed form with ``P_j = l_j (3 l_j - 2)``::

    phi_{n,i,0} = P_j t_k/(n_i.t_k) + P_k t_j/(n_i.t_j) + 6 l_j l_k n_i
    phi_{n,i,1} = 3 P_j t_k/(n_i.t_k) - 3 P_k t_j/(n_i.t_j)
    phi_{n,i,2} = 30 (P_j t_k/(n_i.t_k) + P_k t_j/(n_i.t_j))
    phi_{t,i,0} = 6 l_j l_k t_i
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import CellGeometry, GeometryArrays
from .quadrature import quadrature_edge

NORMAL_MEAN, NORMAL_L1, NORMAL_L2, TANGENT_MEAN = range(4)
KIND_NAMES = ("normal-mean", "normal-legendre1", "normal-legendre2", "tangent-mean")


@dataclass(frozen=True)
class LocalDof:
    """Descriptor of one local degree of freedom.

    ``weight`` documents the edge weight in terms of the cell-local
    barycentric coordinates; ``l_j`` is the coordinate of the start vertex of
    the edge in its counter-clockwise traversal.
    """

    edge: int
    kind: int

    @property
    def index(self) -> int:
        return 4 * self.edge + self.kind

    @property
    def name(self) -> str:
        return KIND_NAMES[self.kind]

    @property
    def weight(self) -> str:
        return ("1", "l_j - l_k", "1/6 - l_j*l_k", "1")[self.kind]


LOCAL_DOFS = tuple(LocalDof(i, kind) for i in range(3) for kind in range(4))


def _unit(m: int) -> np.ndarray:
    e = np.zeros(6)
    e[m] = 1.0
    return e


def _p_coefficients(i: int) -> tuple[np.ndarray, np.ndarray]:
    j, k = (i + 1) % 3, (i + 2) % 3
    # l_j^2 - 2 l_j l_k - 2 l_j l_i ; l_j l_k is bubble i, l_j l_i is bubble k
    pj = _unit(j) - 2.0 * _unit(3 + i) - 2.0 * _unit(3 + k)
    pk = _unit(k) - 2.0 * _unit(3 + i) - 2.0 * _unit(3 + j)
    return pj, pk


_P_COEFFS = tuple(_p_coefficients(i) for i in range(3))


def _batch(geom):
    """Return (normals, tangents, grad_lambda, area, single) with a cell axis."""
    if isinstance(geom, GeometryArrays):
        return geom.normals, geom.tangents, geom.grad_lambda, geom.area, False
    return (
        np.asarray(geom.normals)[None],
        np.asarray(geom.tangents)[None],
        np.asarray(geom.grad_lambda)[None],
        np.atleast_1d(geom.area),
        True,
    )


def basis_coefficients(geom: CellGeometry | GeometryArrays) -> np.ndarray:
    """Monomial coefficients of the 12 shape functions.

    Returns an array of shape ``(12, 6, 2)`` for a single cell or
    ``(nc, 12, 6, 2)`` for :class:`~consfem.mesh.GeometryArrays`.
    """
    n, t, _, area, single = _batch(geom)
    if np.any(area <= 0):
        raise ValueError("degenerate cell geometry")
    nc = n.shape[0]
    C = np.zeros((nc, 12, 6, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        pj, pk = _P_COEFFS[i]
        a = t[:, k] / np.einsum("cd,cd->c", n[:, i], t[:, k])[:, None]
        b = t[:, j] / np.einsum("cd,cd->c", n[:, i], t[:, j])[:, None]
        pja = pj[None, :, None] * a[:, None, :]
        pkb = pk[None, :, None] * b[:, None, :]
        bubble = _unit(3 + i)[None, :, None]
        C[:, 4 * i + NORMAL_MEAN] = pja + pkb + 6.0 * bubble * n[:, i][:, None, :]
        C[:, 4 * i + NORMAL_L1] = 3.0 * (pja - pkb)
        C[:, 4 * i + NORMAL_L2] = 30.0 * (pja + pkb)
        C[:, 4 * i + TANGENT_MEAN] = 6.0 * bubble * t[:, i][:, None, :]
    return C[0] if single else C


def monomials(bary) -> np.ndarray:
    """The six quadratic monomials at barycentric points, shape ``(..., 6)``."""
    b = np.asarray(bary, dtype=float)
    l0, l1, l2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([l0 * l0, l1 * l1, l2 * l2, l1 * l2, l2 * l0, l0 * l1], axis=-1)


def monomial_gradients(bary, grad_lambda) -> np.ndarray:
    """Gradients of the monomials.

    ``bary`` has shape ``(nq, 3)`` and ``grad_lambda`` shape ``(nc, 3, 2)``;
    the result has shape ``(nc, nq, 6, 2)``.
    """
    b = np.atleast_2d(np.asarray(bary, dtype=float))
    g = np.asarray(grad_lambda, dtype=float)
    g0, g1, g2 = g[:, None, 0], g[:, None, 1], g[:, None, 2]
    l0, l1, l2 = (b[None, :, m, None] for m in range(3))
    return np.stack(
        [
            2 * l0 * g0,
            2 * l1 * g1,
            2 * l2 * g2,
            l1 * g2 + l2 * g1,
            l2 * g0 + l0 * g2,
            l0 * g1 + l1 * g0,
        ],
        axis=2,
    )


def _check_bary(bary) -> np.ndarray:
    b = np.asarray(bary, dtype=float)
    if b.shape[-1] != 3:
        raise ValueError("barycentric points need 3 coordinates")
    if np.any(np.abs(b.sum(axis=-1) - 1.0) > 1e-12) or np.any(b < -1e-12):
        raise ValueError("point is not inside the cell (barycentric check failed)")
    return b


def eval_basis(geom: CellGeometry | GeometryArrays, bary) -> np.ndarray:
    """Values of the 12 shape functions.

    For a single cell and a single point the result has shape ``(12, 2)``;
    for ``nq`` points ``(nq, 12, 2)``; batched geometry adds a leading cell
    axis.
    """
    b = _check_bary(bary)
    C = basis_coefficients(geom)
    return np.einsum("...bmd,qm->...qbd", C, monomials(np.atleast_2d(b))).reshape(
        C.shape[:-3] + b.shape[:-1] + (12, 2)
    )


def eval_basis_gradient(geom: CellGeometry | GeometryArrays, bary) -> np.ndarray:
    """Gradients ``G[..., b, comp, dir] = d(phi_b)_comp / dx_dir``."""
    b = _check_bary(bary)
    C = basis_coefficients(geom)
    _, _, gl, _, single = _batch(geom)
    gm = monomial_gradients(np.atleast_2d(b), gl)
    Cb = C[None] if single else C
    G = np.einsum("cbmi,cqmj->cqbij", Cb, gm)
    G = G.reshape((G.shape[0],) + b.shape[:-1] + (12, 2, 2))
    return G[0] if single else G


def eval_basis_divergence(geom: CellGeometry | GeometryArrays, bary) -> np.ndarray:
    return np.trace(eval_basis_gradient(geom, bary), axis1=-2, axis2=-1)


def dof_functionals(
    geom: CellGeometry,
    u: Callable[[np.ndarray], np.ndarray],
    degree: int = 5,
) -> np.ndarray:
    """Apply the 12 local functionals to a vector field.

    ``u`` maps an ``(npts, 2)`` array of points to ``(npts, 2)`` values.
    """
    rule = quadrature_edge(degree)
    s, w = rule.points, rule.weights
    out = np.empty(12)
    a = np.asarray(geom.vertices)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        x = np.outer(1.0 - s, a[j]) + np.outer(s, a[k])
        val = np.asarray(u(x), dtype=float).reshape(len(s), 2)
        un = val @ geom.normals[i]
        ut = val @ geom.tangents[i]
        lj, lk = 1.0 - s, s
        out[4 * i + NORMAL_MEAN] = w @ un
        out[4 * i + NORMAL_L1] = w @ (un * (lj - lk))
        out[4 * i + NORMAL_L2] = w @ (un * (1.0 / 6.0 - lj * lk))
        out[4 * i + TANGENT_MEAN] = w @ ut
    return out


def dof_matrix(geom: CellGeometry, degree: int = 5) -> np.ndarray:
    """``D[r, b]``: functional ``r`` applied to shape function ``b``."""
    C = basis_coefficients(geom)
    rule = quadrature_edge(degree)
    s, w = rule.points, rule.weights
    D = np.empty((12, 12))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        bary = np.zeros((len(s), 3))
        bary[:, j] = 1.0 - s
        bary[:, k] = s
        vals = np.einsum("bmd,qm->qbd", C, monomials(bary))
        un = vals @ geom.normals[i]
        ut = vals @ geom.tangents[i]
        lj, lk = 1.0 - s, s
        D[4 * i + NORMAL_MEAN] = w @ un
        D[4 * i + NORMAL_L1] = (w * (lj - lk)) @ un
        D[4 * i + NORMAL_L2] = (w * (1.0 / 6.0 - lj * lk)) @ un
        D[4 * i + TANGENT_MEAN] = w @ ut
    return D


# ---------------------------------------------------------------------------
# scalar Lagrange elements

# P2 ordering: vertices 0, 1, 2 then midpoints of edges 0, 1, 2
P2_COEFFICIENTS = np.array(
    [
        _unit(0) - _unit(4) - _unit(5),
        _unit(1) - _unit(5) - _unit(3),
        _unit(2) - _unit(3) - _unit(4),
        4.0 * _unit(3),
        4.0 * _unit(4),
        4.0 * _unit(5),
    ]
)
P2_COEFFICIENTS.setflags(write=False)


def eval_scalar_p1(geom: CellGeometry, bary) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(..., 3)`` and gradients ``(..., 3, 2)`` of the P1 basis."""
    b = _check_bary(bary)
    grads = np.broadcast_to(geom.grad_lambda, b.shape[:-1] + (3, 2))
    return b.copy(), grads.copy()


def eval_scalar_p2(geom: CellGeometry, bary) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(..., 6)`` and gradients ``(..., 6, 2)`` of the P2 basis."""
    b = _check_bary(bary)
    b2 = np.atleast_2d(b)
    vals = monomials(b2) @ P2_COEFFICIENTS.T
    gm = monomial_gradients(b2, np.asarray(geom.grad_lambda)[None])[0]
    grads = np.einsum("sm,qmd->qsd", P2_COEFFICIENTS, gm)
    shape = b.shape[:-1]
    return vals.reshape(shape + (6,)), grads.reshape(shape + (6, 2))


def tabulate_p2(grad_lambda: np.ndarray, bary: np.ndarray):
    """Batched P2 values ``(nq, 6)`` and gradients ``(nc, nq, 6, 2)``."""
    vals = monomials(bary) @ P2_COEFFICIENTS.T
    gm = monomial_gradients(bary, grad_lambda)
    return vals, np.einsum("sm,cqmd->cqsd", P2_COEFFICIENTS, gm)
