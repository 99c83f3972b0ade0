"""Post-processing of steady driven-cavity flows.

The streamfunction solves ``-lap psi = rot u_h`` (cellwise rotation of the
discrete velocity) in continuous P2 with ``psi = 0`` on the boundary, so
``u = (d psi/dy, -d psi/dx)`` for the exact flow.  The vorticity is the L2
projection of the cellwise rotation onto continuous P1.  Extremes are
searched on a uniform lattice of the unit square.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .element import P2_COEFFICIENTS, monomials, tabulate_p2
from .mesh import Triangulation
from .quadrature import quadrature_triangle
from .space import PointLocator, evaluate_points

DEGREE = 4


class ScalarP2:
    """Continuous P2 scalars: vertex values first, then edge midpoints."""

    def __init__(self, mesh: Triangulation):
        self.mesh = mesh
        nv = mesh.num_vertices
        self.dim = nv + mesh.num_edges
        self.cell_dofs = np.hstack([mesh.cells, nv + mesh.cell_edges])
        bnd = mesh.boundary_edges
        on = np.zeros(self.dim, dtype=bool)
        on[mesh.edges[bnd].ravel()] = True
        on[nv + bnd] = True
        self.boundary = on

    def _local(self, degree):
        rule = quadrature_triangle(degree)
        g = self.mesh.geometry
        vals, dvals = tabulate_p2(g.grad_lambda, rule.points)
        return rule, 2.0 * g.area, vals, dvals

    def stiffness(self) -> sp.csr_matrix:
        rule, jac, _, dvals = self._local(2)
        local = np.einsum("q,c,cqad,cqbd->cab", rule.weights, jac, dvals, dvals)
        return self._assemble(local)

    def _assemble(self, local) -> sp.csr_matrix:
        d = self.cell_dofs
        rows = np.broadcast_to(d[:, :, None], local.shape).ravel()
        cols = np.broadcast_to(d[:, None, :], local.shape).ravel()
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(self.dim, self.dim))

    def load(self, values: np.ndarray, degree: int) -> np.ndarray:
        """``int v phi_i`` for cellwise values ``(nc, nq)`` at the degree-`degree` rule."""
        rule, jac, vals, _ = self._local(degree)
        local = np.einsum("q,c,cq,qa->ca", rule.weights, jac, values, vals)
        return np.bincount(self.cell_dofs.ravel(), weights=local.ravel(), minlength=self.dim)

    def evaluate(self, coeffs: np.ndarray, cells: np.ndarray, bary: np.ndarray) -> np.ndarray:
        out = np.full(len(cells), np.nan)
        inside = cells >= 0
        vals = monomials(bary[inside]) @ P2_COEFFICIENTS.T
        out[inside] = np.einsum("na,na->n", vals, coeffs[self.cell_dofs[cells[inside]]])
        return out


def cellwise_rotation(space, coeffs: np.ndarray, degree: int = DEGREE) -> np.ndarray:
    """``d u2/dx - d u1/dy`` at the quadrature points, shape ``(nc, nq)``."""
    _, grad = space.values_at(coeffs, quadrature_triangle(degree).points)
    return grad[..., 1, 0] - grad[..., 0, 1]


def streamfunction(space, coeffs: np.ndarray) -> tuple[ScalarP2, np.ndarray]:
    """P2 streamfunction with ``-lap psi = rot_h u`` and ``psi = 0`` on the boundary."""
    p2 = ScalarP2(space.mesh)
    K = p2.stiffness()
    F = p2.load(cellwise_rotation(space, coeffs), DEGREE)
    free = np.flatnonzero(~p2.boundary)
    psi = np.zeros(p2.dim)
    psi[free] = spla.spsolve(K[free][:, free].tocsc(), F[free])
    return p2, psi


def vorticity(space, coeffs: np.ndarray) -> np.ndarray:
    """L2 projection of the cellwise rotation onto continuous P1 (vertex values)."""
    mesh = space.mesh
    rule = quadrature_triangle(DEGREE)
    jac = 2.0 * mesh.geometry.area
    rot = cellwise_rotation(space, coeffs)
    local_m = jac[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None] / 24.0
    rows = np.broadcast_to(mesh.cells[:, :, None], local_m.shape).ravel()
    cols = np.broadcast_to(mesh.cells[:, None, :], local_m.shape).ravel()
    M = sp.csr_matrix((local_m.ravel(), (rows, cols)), shape=(mesh.num_vertices,) * 2)
    rhs = np.einsum("q,c,cq,qa->ca", rule.weights, jac, rot, rule.points)
    F = np.bincount(mesh.cells.ravel(), weights=rhs.ravel(), minlength=mesh.num_vertices)
    return spla.spsolve(M.tocsc(), F)


@dataclass
class Vortex:
    value: float
    x: float
    y: float
    vorticity: float


@dataclass
class CavityDiagnostics:
    primary: Vortex
    secondary: Vortex
    lattice: int
    psi_range: tuple[float, float]
    vorticity_range: tuple[float, float]
    pressure_range: tuple[float, float]
    centerline_u: np.ndarray = field(repr=False)
    centerline_v: np.ndarray = field(repr=False)
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["centerline_u"] = self.centerline_u.tolist()
        d["centerline_v"] = self.centerline_v.tolist()
        return d


def _p1_at(mesh: Triangulation, values: np.ndarray, cells, bary) -> np.ndarray:
    out = np.full(len(cells), np.nan)
    inside = cells >= 0
    out[inside] = np.einsum("na,na->n", bary[inside], values[mesh.cells[cells[inside]]])
    return out


def cavity_diagnostics(
    space,
    velocity: np.ndarray,
    pressure: np.ndarray | None = None,
    lattice: int = 257,
    time_derivative: float | None = None,
    steady_threshold: float = 1e-6,
) -> CavityDiagnostics:
    """Vortex centres and values of a unit-square cavity flow.

    The primary vortex is the extreme of ``psi`` with the sign of the
    interior maximum modulus; the secondary vortex is the opposite-sign
    extreme within the lower-left quadrant.  Vorticity values are reported
    at the vortex centres, centerline profiles at ``x = 0.5`` and ``y = 0.5``.
    """
    mesh = space.mesh
    p2, psi = streamfunction(space, velocity)
    omega = vorticity(space, velocity)
    s = np.linspace(0.0, 1.0, lattice)
    X, Y = np.meshgrid(s, s, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    locate = PointLocator(mesh)
    cells, bary = locate(pts)
    psi_l = p2.evaluate(psi, cells, bary).reshape(X.shape)
    om_l = _p1_at(mesh, omega, cells, bary).reshape(X.shape)

    sign = 1.0 if np.nanmax(psi_l) >= -np.nanmin(psi_l) else -1.0
    i, j = np.unravel_index(np.nanargmax(sign * psi_l), psi_l.shape)
    primary = Vortex(float(psi_l[i, j]), float(s[i]), float(s[j]), float(om_l[i, j]))
    quad = (X < 0.5) & (Y < 0.5)
    masked = np.where(quad, -sign * psi_l, -np.inf)
    i, j = np.unravel_index(np.nanargmax(masked), psi_l.shape)
    secondary = Vortex(float(psi_l[i, j]), float(s[i]), float(s[j]), float(om_l[i, j]))

    prange = (float("nan"), float("nan"))
    if pressure is not None:
        pvals = space_pressure_at(space, pressure, cells, bary)
        prange = (float(np.nanmin(pvals)), float(np.nanmax(pvals)))

    vert = np.column_stack([np.full(lattice, 0.5), s])
    horiz = np.column_stack([s, np.full(lattice, 0.5)])
    cu = evaluate_points(space, velocity, vert, locate)[:, 0]
    cv = evaluate_points(space, velocity, horiz, locate)[:, 1]
    warnings = []
    if time_derivative is not None and time_derivative > steady_threshold:
        warnings.append(
            f"flow is not steady: time derivative {time_derivative:.3e} > {steady_threshold:.1e}"
        )
    return CavityDiagnostics(
        primary,
        secondary,
        lattice,
        (float(np.nanmin(psi_l)), float(np.nanmax(psi_l))),
        (float(np.nanmin(om_l)), float(np.nanmax(om_l))),
        prange,
        np.column_stack([s, cu]),
        np.column_stack([s, cv]),
        warnings,
    )


def space_pressure_at(space, pressure, cells, bary) -> np.ndarray:
    """Pressure of either element pair at located points."""
    mesh = space.mesh
    pdofs = getattr(space, "pressure", None)
    if pdofs is not None:  # continuous P1
        return _p1_at(mesh, pressure, cells, bary)
    out = np.full(len(cells), np.nan)
    inside = cells >= 0
    local = np.asarray(pressure).reshape(-1, 3)[cells[inside]]
    out[inside] = np.einsum("na,na->n", bary[inside], local)
    return out
