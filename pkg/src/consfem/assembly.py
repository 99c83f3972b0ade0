"""Sparse assembly of bilinear, trilinear and load forms.

Every routine works for both :class:`~consfem.space.VelocitySpace` and
:class:`~consfem.space.TaylorHoodSpace`: a velocity space exposes per-cell
monomial coefficients of its local basis, the global DOF ids of the local
basis and the local-to-global signs.  Polynomial forms are integrated with
rules exact for their integrands; loads use degree 6 unless told otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import kernels
from .element import monomial_gradients, monomials
from .quadrature import quadrature_triangle

LOAD_DEGREE = 6
CONVECTION_DEGREE = 6
SCHEMES = ("stokes", "brinkman", "darcy")


class SparsityPattern:
    """CSR structure of an element-by-element assembled matrix.

    Assembly of local matrices is a single ``bincount`` into the stored
    structure, which makes repeated assembly (e.g. convection inside a
    nonlinear loop) cheap.
    """

    def __init__(self, row_dofs: np.ndarray, col_dofs: np.ndarray, shape: tuple[int, int]):
        nc, na = row_dofs.shape
        nb = col_dofs.shape[1]
        rows = np.broadcast_to(row_dofs[:, :, None], (nc, na, nb)).ravel()
        cols = np.broadcast_to(col_dofs[:, None, :], (nc, na, nb)).ravel()
        key = rows.astype(np.int64) * shape[1] + cols
        uniq, self._inverse = np.unique(key, return_inverse=True)
        self.nnz = len(uniq)
        self.shape = shape
        self.indices = (uniq % shape[1]).astype(np.int32)
        self.indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(uniq // shape[1], minlength=shape[0]), out=self.indptr[1:])

    def assemble(self, local: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self._inverse, weights=local.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


def _pattern(space, key: str, row_dofs, col_dofs, shape) -> SparsityPattern:
    cache = space.__dict__.setdefault("_sparsity_cache", {})
    if key not in cache:
        cache[key] = SparsityPattern(row_dofs, col_dofs, shape)
    return cache[key]


def _signed(space, local: np.ndarray) -> np.ndarray:
    s = space.cell_signs
    return local * s[:, :, None] * s[:, None, :]


def _assemble_vv(space, local: np.ndarray) -> sp.csr_matrix:
    pat = _pattern(space, "vv", space.cell_dofs, space.cell_dofs, (space.dim, space.dim))
    return pat.assemble(_signed(space, local))


def _geometry_args(space, degree: int):
    rule = quadrature_triangle(degree)
    g = space.mesh.geometry
    return space.coefficients, g.grad_lambda, g.area, rule.points, rule.weights


# ---------------------------------------------------------------------------
# bilinear forms


def assemble_gradgrad(space, degree: int = 2) -> sp.csr_matrix:
    """``K[i, j] = sum_T int_T grad phi_j : grad phi_i``."""
    return _assemble_vv(space, kernels.gradgrad_local(*_geometry_args(space, degree)))


def assemble_mass(space, degree: int = 4) -> sp.csr_matrix:
    """``M[i, j] = int phi_j . phi_i``."""
    return _assemble_vv(space, kernels.mass_local(*_geometry_args(space, degree)))


def local_divergence(space, degree: int = 3) -> np.ndarray:
    """Unsigned ``(nc, 3, nb)`` array of ``int_T lambda_i div phi_b``."""
    C, gl, area, bary, w = _geometry_args(space, degree)
    div = np.einsum("cbmi,cqmi->cqb", C, monomial_gradients(bary, gl))
    return np.einsum("q,c,qi,cqb->cib", w, 2.0 * area, bary, div)


def assemble_div(vspace, pspace, degree: int = 3) -> sp.csr_matrix:
    """``B[p, u] = int div(phi_u) q_p`` (pressure rows, velocity columns)."""
    local = local_divergence(vspace, degree) * vspace.cell_signs[:, None, :]
    pat = _pattern(
        vspace, f"pv{pspace.dim}", pspace.cell_dofs, vspace.cell_dofs, (pspace.dim, vspace.dim)
    )
    return pat.assemble(local)


def assemble_pressure_mass(pspace) -> sp.csr_matrix:
    """Mass matrix of the (discontinuous or continuous) P1 pressure space."""
    area = pspace.mesh.geometry.area
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * ref[None]
    rows = np.broadcast_to(pspace.cell_dofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(pspace.cell_dofs[:, None, :], local.shape).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(pspace.dim, pspace.dim))


def assemble_symgrad(space, degree: int = 2) -> sp.csr_matrix:
    """``E[i, j] = sum_T int_T eps(phi_j) : eps(phi_i)`` with the symmetric gradient."""
    C, gl, area, bary, w = _geometry_args(space, degree)
    G = np.einsum("cbmi,cqmj->cqbij", C, monomial_gradients(bary, gl))
    E = 0.5 * (G + np.swapaxes(G, -1, -2))
    local = np.einsum("q,c,cqaij,cqbij->cab", w, 2.0 * area, E, E, optimize=True)
    return _assemble_vv(space, local)


def assemble_coriolis(space, omega: float, degree: int = 4) -> sp.csr_matrix:
    """``C[i, j] = int 2 omega phi_j^perp . phi_i`` with ``u^perp = (-u_2, u_1)``."""
    C, gl, area, bary, w = _geometry_args(space, degree)
    vals = np.einsum("cbmi,qm->cqbi", C, monomials(bary))
    perp = np.stack([-vals[..., 1], vals[..., 0]], axis=-1)
    local = 2.0 * omega * np.einsum("q,c,cqbi,cqai->cab", w, 2.0 * area, perp, vals)
    return _assemble_vv(space, local)


# ---------------------------------------------------------------------------
# trilinear forms


def assemble_convection(
    space, w_coeffs: np.ndarray, degree: int = CONVECTION_DEGREE, skew: bool = False
) -> sp.csr_matrix:
    """Linearised convection ``N(w)[i, j] = sum_T int_T (w . grad phi_j) . phi_i``.

    With ``skew=True`` the skew-symmetrised form
    ``(N(w) - N(w)^T) / 2`` is returned.
    """
    wloc = space.gather(w_coeffs)
    local = kernels.convection_local(*_geometry_args(space, degree), wloc)
    if skew:
        local = 0.5 * (local - np.swapaxes(local, 1, 2))
    return _assemble_vv(space, local)


def assemble_convection_derivative(
    space, u_coeffs: np.ndarray, degree: int = CONVECTION_DEGREE
) -> sp.csr_matrix:
    """``N'(u)[i, j] = sum_T int_T (phi_j . grad u) . phi_i``."""
    uloc = space.gather(u_coeffs)
    local = kernels.convection_derivative_local(*_geometry_args(space, degree), uloc)
    return _assemble_vv(space, local)


def _skew_extra_local(space, u_coeffs, degree):
    """``X[a, b] = int (phi_b . grad phi_a) . u`` (needed by the skew Jacobian)."""
    C, gl, area, bary, w = _geometry_args(space, degree)
    vals = np.einsum("cbmi,qm->cqbi", C, monomials(bary))
    grads = np.einsum("cbmi,cqmj->cqbij", C, monomial_gradients(bary, gl))
    uq = np.einsum("cqbi,cb->cqi", vals, space.gather(u_coeffs))
    return np.einsum("q,c,cqbj,cqaij,cqi->cab", w, 2.0 * area, vals, grads, uq, optimize=True)


def convection_jacobian(
    space, u_coeffs: np.ndarray, degree: int = CONVECTION_DEGREE, skew: bool = False
) -> sp.csr_matrix:
    """Jacobian of ``u -> N(u) u`` at ``u``: ``N(u) + N'(u)``."""
    uloc = space.gather(u_coeffs)
    args = _geometry_args(space, degree)
    N = kernels.convection_local(*args, uloc)
    D = kernels.convection_derivative_local(*args, uloc)
    if not skew:
        return _assemble_vv(space, N + D)
    X = _skew_extra_local(space, u_coeffs, degree)
    return _assemble_vv(space, 0.5 * (N + D - X - np.swapaxes(N, 1, 2)))


# ---------------------------------------------------------------------------
# loads


def quadrature_points(mesh, degree: int):
    """Physical quadrature points ``(nc, nq, 2)`` and weights ``(nc, nq)``."""
    rule = quadrature_triangle(degree)
    x = np.einsum("qv,cvd->cqd", rule.points, mesh.geometry.vertices)
    return x, rule.weights[None, :] * 2.0 * mesh.geometry.area[:, None]


def assemble_load(
    space, f: Callable[[np.ndarray], np.ndarray], degree: int = LOAD_DEGREE
) -> np.ndarray:
    """``F[i] = int f . phi_i``; `f` maps ``(n, 2)`` points to ``(n, 2)`` values."""
    mesh = space.mesh
    x, wx = quadrature_points(mesh, degree)
    fx = np.asarray(f(x.reshape(-1, 2)), dtype=float).reshape(x.shape)
    vals, _ = space.tabulate(quadrature_triangle(degree).points)
    local = np.einsum("cq,cqi,cqbi->cb", wx, fx, vals) * space.cell_signs
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.dim)


def assemble_pressure_load(
    pspace, g: Callable[[np.ndarray], np.ndarray] | None, degree: int = LOAD_DEGREE
) -> np.ndarray:
    """``G[p] = int g q_p``."""
    if g is None:
        return np.zeros(pspace.dim)
    rule = quadrature_triangle(degree)
    x, wx = quadrature_points(pspace.mesh, degree)
    gx = np.asarray(g(x.reshape(-1, 2)), dtype=float).reshape(x.shape[:2])
    local = np.einsum("cq,cq,qi->ci", wx, gx, rule.points)
    return np.bincount(pspace.cell_dofs.ravel(), weights=local.ravel(), minlength=pspace.dim)


# ---------------------------------------------------------------------------
# systems


@dataclass
class Operators:
    """Parameter-independent matrices of one velocity/pressure pair."""

    vspace: object
    pspace: object
    K: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix

    @classmethod
    def assemble(cls, vspace, pspace) -> "Operators":
        return cls(
            vspace,
            pspace,
            assemble_gradgrad(vspace),
            assemble_mass(vspace),
            assemble_div(vspace, pspace),
        )


@dataclass
class SaddleSystem:
    """``[[A, -B^T, 0], [-B, 0, c], [0, c^T, 0]]`` with right-hand side.

    The velocity equation reads ``A u - B^T p = rhs_u`` and the pressure
    equation ``-B u = -rhs_p``, i.e. ``(div u, q) = (g, q)``.  ``c`` is the
    mean-value functional of the pressure (or None when the pressure is not
    normalised).
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    c: np.ndarray | None
    rhs_u: np.ndarray
    rhs_p: np.ndarray
    vspace: object
    pspace: object
    scheme: str = "stokes"
    eps2: float = 1.0
    symmetric: bool = True
    info: dict = field(default_factory=dict)


def build_system(
    scheme: str,
    eps2: float,
    vspace,
    pspace,
    f=None,
    g=None,
    ops: Operators | None = None,
    load_degree: int = LOAD_DEGREE,
) -> SaddleSystem:
    """Assemble the Stokes, Brinkman or Darcy saddle-point system.

    ``A = eps2 K`` for Stokes and ``A = eps2 K + M`` for Brinkman and Darcy
    (Darcy requires ``eps2 = 0``).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if eps2 < 0:
        raise ValueError("eps2 must be non-negative")
    if scheme == "stokes" and eps2 == 0:
        raise ValueError("the Stokes scheme with eps2 = 0 has a singular velocity block")
    if scheme == "darcy" and eps2 != 0:
        raise ValueError("the Darcy scheme requires eps2 = 0")
    ops = ops or Operators.assemble(vspace, pspace)
    A = eps2 * ops.K if scheme == "stokes" else eps2 * ops.K + ops.M
    rhs_u = assemble_load(vspace, f, load_degree) if f is not None else np.zeros(vspace.dim)
    rhs_p = assemble_pressure_load(pspace, g, load_degree)
    c = pspace.mean_constraint if pspace.mean_zero else None
    return SaddleSystem(
        A.tocsr(), ops.B, c, rhs_u, rhs_p, vspace, pspace, scheme, float(eps2)
    )


def dump_matrix_market(matrix, path, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment)
