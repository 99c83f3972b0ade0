"""Global finite element spaces and degree-of-freedom bookkeeping.

:class:`VelocitySpace` is the edge-based quadratic velocity space: four DOFs
per global edge, defined with the global normal ``n_e``, tangent ``t_e`` and
the weight ``l_v0 - l_v1`` (``v0``, ``v1`` the stored edge vertices).  A cell
whose local traversal of the edge opposes the stored direction sees both
``n`` and ``t`` reversed as well as the weight, so its local-to-global signs
are ``(-1, +1, -1, -1)``; the first incident cell always sees ``+1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .element import (
    NORMAL_L1,
    NORMAL_L2,
    NORMAL_MEAN,
    TANGENT_MEAN,
    P2_COEFFICIENTS,
    basis_coefficients,
    monomial_gradients,
    monomials,
)
from .mesh import MeshError, Triangulation
from .quadrature import quadrature_edge

VectorField = Callable[[np.ndarray], np.ndarray]


def _resolve_tags(mesh: Triangulation, dirichlet) -> frozenset[str]:
    if dirichlet is None or dirichlet == "all":
        return frozenset(mesh.tag_names)
    if isinstance(dirichlet, str):
        dirichlet = [dirichlet]
    tags = frozenset(dirichlet)
    unknown = tags - mesh.tag_names
    if unknown:
        raise ValueError(
            f"unknown boundary tag(s) {sorted(unknown)}; mesh has {sorted(mesh.tag_names)}"
        )
    return tags


class _VectorSpace:
    """Shared evaluation helpers; subclasses define ``coefficients``,
    ``cell_dofs`` and ``cell_signs``."""

    mesh: Triangulation

    @property
    def num_free(self) -> int:
        return len(self.free_dofs)

    @property
    def constrained_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.constrained)

    def gather(self, coeffs: np.ndarray) -> np.ndarray:
        """Local (cell-oriented) coefficients, shape ``(nc, 12)``."""
        return np.asarray(coeffs)[self.cell_dofs] * self.cell_signs

    def tabulate(self, bary: np.ndarray):
        """Unsigned basis values ``(nc, nq, 12, 2)`` and gradients ``(nc, nq, 12, 2, 2)``."""
        bary = np.atleast_2d(bary)
        C = self.coefficients
        vals = np.einsum("cbmi,qm->cqbi", C, monomials(bary))
        gm = monomial_gradients(bary, self.mesh.geometry.grad_lambda)
        grads = np.einsum("cbmi,cqmj->cqbij", C, gm)
        return vals, grads

    def values_at(self, coeffs: np.ndarray, bary: np.ndarray):
        """Field values ``(nc, nq, 2)`` and gradients ``(nc, nq, 2, 2)`` at ``bary``."""
        local = self.gather(coeffs)
        bary = np.atleast_2d(bary)
        C = np.einsum("cbmi,cb->cmi", self.coefficients, local)
        vals = np.einsum("cmi,qm->cqi", C, monomials(bary))
        gm = monomial_gradients(bary, self.mesh.geometry.grad_lambda)
        grads = np.einsum("cmi,cqmj->cqij", C, gm)
        return vals, grads


class VelocitySpace(_VectorSpace):
    """The quadratic H(div)-conforming velocity space with edge DOFs.

    Parameters
    ----------
    mesh : Triangulation
    dirichlet : iterable of str, ``"all"`` or None
        Boundary tags forming the Dirichlet part of the boundary; ``None`` or
        ``"all"`` constrains the whole boundary and an empty iterable leaves
        every DOF free.
    """

    def __init__(self, mesh: Triangulation, dirichlet: Iterable[str] | str | None = None):
        self.mesh = mesh
        self.dirichlet_tags = _resolve_tags(mesh, dirichlet)
        self.dim = 4 * mesh.num_edges
        self.edge_dofs = 4 * np.arange(mesh.num_edges)[:, None] + np.arange(4)[None, :]
        self.cell_dofs = (4 * mesh.cell_edges[:, :, None] + np.arange(4)).reshape(-1, 12)
        sigma = mesh.cell_edge_sign[:, :, None]
        # normal-mean, normal-L2 and tangent-mean follow the cell's own (n, t)
        flips = np.array([True, False, True, True])
        signs = np.where(flips, sigma, 1)
        self.cell_signs = signs.reshape(-1, 12).astype(float)
        dir_edges = mesh.edges_with_tags(self.dirichlet_tags)
        self.dirichlet_edges = dir_edges
        mask = np.zeros(self.dim, dtype=bool)
        if len(dir_edges):
            mask[self.edge_dofs[dir_edges].ravel()] = True
        self.constrained = mask
        self.free_dofs = np.flatnonzero(~mask)
        for arr in (self.edge_dofs, self.cell_dofs, self.cell_signs, self.constrained):
            arr.setflags(write=False)

    def __repr__(self) -> str:
        return f"VelocitySpace(dim={self.dim}, free={self.num_free})"

    def interpolate(self, u: VectorField, degree: int = 8) -> np.ndarray:
        return interpolate(self, u, degree)

    def boundary_values(self, data, degree: int = 8) -> np.ndarray:
        return boundary_values(self, data, degree)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Monomial coefficients of the (locally oriented) basis per cell."""
        C = basis_coefficients(self.mesh.geometry)
        C.setflags(write=False)
        return C


def build_velocity_space(mesh: Triangulation, dirichlet=None) -> VelocitySpace:
    return VelocitySpace(mesh, dirichlet)


def gather_cell_dofs(space, cell: int) -> list[tuple[int, float]]:
    """``(global id, sign)`` for each local DOF of `cell`."""
    return [
        (int(d), float(s)) for d, s in zip(space.cell_dofs[cell], space.cell_signs[cell])
    ]


@dataclass(frozen=True)
class PressureSpace:
    """Discontinuous P1 pressures in the barycentric basis of each cell.

    ``mean_zero`` marks the space of mean-zero pressures; the constraint is
    imposed at solve time through :attr:`mean_constraint`.
    """

    mesh: Triangulation
    mean_zero: bool = True

    @property
    def dim(self) -> int:
        return 3 * self.mesh.num_cells

    @property
    def cell_dofs(self) -> np.ndarray:
        return np.arange(self.dim).reshape(-1, 3)

    @cached_property
    def mean_constraint(self) -> np.ndarray:
        """Integrals of the basis functions (each equals area / 3)."""
        return np.repeat(self.mesh.geometry.area / 3.0, 3)

    def values_at(self, coeffs: np.ndarray, bary: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs).reshape(-1, 3) @ np.atleast_2d(bary).T

    def gradients(self, coeffs: np.ndarray) -> np.ndarray:
        """Cellwise constant gradients, shape ``(nc, 2)``."""
        return np.einsum("ci,cid->cd", np.asarray(coeffs).reshape(-1, 3),
                         self.mesh.geometry.grad_lambda)


def build_pressure_space(mesh: Triangulation, mean_zero: bool = True) -> PressureSpace:
    return PressureSpace(mesh, mean_zero)


@dataclass(frozen=True)
class ContinuousP1Space:
    """Continuous P1 pressures (vertex values), the Taylor--Hood pressure."""

    mesh: Triangulation
    mean_zero: bool = True

    @property
    def dim(self) -> int:
        return self.mesh.num_vertices

    @property
    def cell_dofs(self) -> np.ndarray:
        return self.mesh.cells

    @cached_property
    def mean_constraint(self) -> np.ndarray:
        c = np.zeros(self.dim)
        np.add.at(c, self.mesh.cells, np.repeat(self.mesh.geometry.area[:, None] / 3.0, 3, 1))
        return c

    def values_at(self, coeffs: np.ndarray, bary: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs)[self.mesh.cells] @ np.atleast_2d(bary).T

    def interpolate(self, p: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.asarray(p(self.mesh.vertices), dtype=float).reshape(-1)


def _th_coefficients() -> np.ndarray:
    C = np.zeros((12, 6, 2))
    for s_ in range(6):
        for d in range(2):
            C[2 * s_ + d, :, d] = P2_COEFFICIENTS[s_]
    return C


class TaylorHoodSpace(_VectorSpace):
    """Continuous P2 vector velocity; :attr:`pressure` is continuous P1.

    Scalar P2 DOFs are numbered vertices first, then edge midpoints; the
    velocity DOF of scalar node ``s`` and component ``d`` is ``2*s + d``.
    """

    def __init__(self, mesh: Triangulation, dirichlet=None, mean_zero: bool = True):
        self.mesh = mesh
        self.dirichlet_tags = _resolve_tags(mesh, dirichlet)
        self.pressure = ContinuousP1Space(mesh, mean_zero)
        nv, ne = mesh.num_vertices, mesh.num_edges
        self.num_scalar = nv + ne
        self.dim = 2 * self.num_scalar
        self.cell_scalar_dofs = np.hstack([mesh.cells, nv + mesh.cell_edges])
        self.cell_dofs = (2 * self.cell_scalar_dofs[:, :, None] + np.arange(2)).reshape(-1, 12)
        self.cell_signs = np.ones(self.cell_dofs.shape)
        dir_edges = mesh.edges_with_tags(self.dirichlet_tags)
        self.dirichlet_edges = dir_edges
        nodes = np.zeros(self.num_scalar, dtype=bool)
        if len(dir_edges):
            nodes[mesh.edges[dir_edges].ravel()] = True
            nodes[nv + dir_edges] = True
        self.constrained = np.repeat(nodes, 2)
        self.free_dofs = np.flatnonzero(~self.constrained)
        self.nodes = np.vstack(
            [
                mesh.vertices,
                0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]]),
            ]
        )

    def __repr__(self) -> str:
        return f"TaylorHoodSpace(velocity={self.dim}, pressure={self.pressure.dim})"

    @cached_property
    def coefficients(self) -> np.ndarray:
        C = np.ascontiguousarray(
            np.broadcast_to(_th_coefficients(), (self.mesh.num_cells, 12, 6, 2))
        )
        C.setflags(write=False)
        return C

    def interpolate(self, u: VectorField) -> np.ndarray:
        return np.asarray(u(self.nodes), dtype=float).reshape(-1)

    def boundary_values(self, data) -> np.ndarray:
        out = np.zeros(self.dim)
        mesh = self.mesh
        nv = mesh.num_vertices
        for tag, g in _per_tag(data, self.dirichlet_tags).items():
            edges = mesh.edges_with_tags([tag])
            if g is None or not len(edges):
                continue
            nodes = np.concatenate([mesh.edges[edges].ravel(), nv + edges])
            vals = np.asarray(g(self.nodes[nodes]), dtype=float).reshape(-1, 2)
            out[2 * nodes] = vals[:, 0]
            out[2 * nodes + 1] = vals[:, 1]
        return out


def _per_tag(data, tags) -> dict:
    if data is None:
        return {}
    if isinstance(data, Mapping):
        unknown = set(data) - set(tags)
        if unknown:
            raise ValueError(f"boundary data given for non-Dirichlet tags {sorted(unknown)}")
        return dict(data)
    return {t: data for t in sorted(tags)}


# ---------------------------------------------------------------------------
# interpolation and evaluation


def edge_functionals(
    mesh: Triangulation, edges: np.ndarray, u: VectorField, degree: int = 8
) -> np.ndarray:
    """Global DOF values ``(len(edges), 4)`` of a vector field on the given edges."""
    edges = np.asarray(edges, dtype=int)
    rule = quadrature_edge(degree)
    s, w = rule.points, rule.weights
    x0 = mesh.vertices[mesh.edges[edges, 0]]
    x1 = mesh.vertices[mesh.edges[edges, 1]]
    pts = x0[:, None, :] * (1.0 - s)[None, :, None] + x1[:, None, :] * s[None, :, None]
    vals = np.asarray(u(pts.reshape(-1, 2)), dtype=float).reshape(len(edges), len(s), 2)
    un = np.einsum("eqd,ed->eq", vals, mesh.edge_normals[edges])
    ut = np.einsum("eqd,ed->eq", vals, mesh.edge_tangents[edges])
    out = np.empty((len(edges), 4))
    out[:, NORMAL_MEAN] = un @ w
    out[:, NORMAL_L1] = un @ (w * (1.0 - 2.0 * s))
    out[:, NORMAL_L2] = un @ (w * (1.0 / 6.0 - s * (1.0 - s)))
    out[:, TANGENT_MEAN] = ut @ w
    return out


def interpolate(space: VelocitySpace, u: VectorField, degree: int = 8) -> np.ndarray:
    """Nodal interpolant: the global DOF vector of `u`."""
    edges = np.arange(space.mesh.num_edges)
    return edge_functionals(space.mesh, edges, u, degree).reshape(-1)


def boundary_values(space: VelocitySpace, data, degree: int = 8) -> np.ndarray:
    """Interpolated Dirichlet datum on the constrained DOFs, zero elsewhere.

    `data` is a vector field applied on every Dirichlet edge, or a mapping
    ``{tag: field}``; tags missing from the mapping get zero data.
    """
    out = np.zeros(space.dim)
    for tag, g in _per_tag(data, space.dirichlet_tags).items():
        edges = space.mesh.edges_with_tags([tag])
        if g is None or not len(edges):
            continue
        out[space.edge_dofs[edges].ravel()] = edge_functionals(
            space.mesh, edges, g, degree
        ).ravel()
    return out


@dataclass(frozen=True)
class FieldSample:
    value: np.ndarray
    gradient: np.ndarray

    @property
    def divergence(self) -> float:
        return float(np.trace(self.gradient))


def evaluate_field(space: VelocitySpace, coeffs, cell: int, bary) -> FieldSample:
    """Value, gradient and divergence of a discrete velocity at one point."""
    bary = np.asarray(bary, dtype=float)
    local = np.asarray(coeffs)[space.cell_dofs[cell]] * space.cell_signs[cell]
    C = np.einsum("bmi,b->mi", space.coefficients[cell], local)
    val = monomials(bary) @ C
    gm = monomial_gradients(bary[None], space.mesh.geometry.grad_lambda[cell : cell + 1])
    grad = np.einsum("mi,mj->ij", C, gm[0, 0])
    return FieldSample(val, grad)


@dataclass
class PointLocator:
    """Find the cell containing given points (KD-tree over cell centroids)."""

    mesh: Triangulation
    candidates: int = 12
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        centroids = self.mesh.vertices[self.mesh.cells].mean(axis=1)
        self._tree = cKDTree(centroids)

    def __call__(self, points: np.ndarray, tol: float = 1e-10):
        """Return ``(cells, bary)``; cells of points outside the mesh are -1."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = min(self.candidates, self.mesh.num_cells)
        _, idx = self._tree.query(pts, k=k)
        idx = np.asarray(idx).reshape(len(pts), k)
        cells = -np.ones(len(pts), dtype=int)
        bary = np.zeros((len(pts), 3))
        todo = np.arange(len(pts))
        for r in range(k):
            if not len(todo):
                break
            c = idx[todo, r]
            b = self._bary(c, pts[todo])
            ok = b.min(axis=1) >= -tol
            hit = todo[ok]
            cells[hit] = c[ok]
            bary[hit] = b[ok]
            todo = todo[~ok]
        for p in todo:  # fall back to a linear scan
            b = self._bary(np.arange(self.mesh.num_cells), np.repeat(pts[p : p + 1], self.mesh.num_cells, 0))
            best = int(np.argmax(b.min(axis=1)))
            if b[best].min() >= -tol:
                cells[p] = best
                bary[p] = b[best]
        bary = np.clip(bary, 0.0, None)
        bary /= np.where(bary.sum(axis=1, keepdims=True) > 0, bary.sum(axis=1, keepdims=True), 1)
        return cells, bary

    def _bary(self, cells: np.ndarray, pts: np.ndarray) -> np.ndarray:
        g = self.mesh.geometry
        a0 = g.vertices[cells, 0]
        gl = g.grad_lambda[cells]
        l1 = np.einsum("nd,nd->n", pts - a0, gl[:, 1])
        l2 = np.einsum("nd,nd->n", pts - a0, gl[:, 2])
        return np.column_stack([1.0 - l1 - l2, l1, l2])


def evaluate_points(space, coeffs, points, locator: PointLocator | None = None):
    """Velocity values ``(npts, 2)`` at physical points (NaN outside the mesh)."""
    locator = locator or PointLocator(space.mesh)
    cells, bary = locator(points)
    out = np.full((len(cells), 2), np.nan)
    inside = cells >= 0
    local = space.gather(coeffs)[cells[inside]]
    C = np.einsum("nbmi,nb->nmi", space.coefficients[cells[inside]], local)
    out[inside] = np.einsum("nmi,nm->ni", C, monomials(bary[inside]))
    return out


def check_mesh_tags(mesh: Triangulation, tags: Iterable[str]) -> None:
    missing = set(tags) - mesh.tag_names
    if missing:
        raise MeshError(f"mesh lacks boundary tags {sorted(missing)}")
