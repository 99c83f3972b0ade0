"""Triangulations: construction, red refinement, geometry and patches.

Conventions used throughout the package
--------------------------------------
* Cells are stored counter-clockwise.  Local edge ``i`` of a cell is the side
  opposite local vertex ``i``; it runs from vertex ``j = (i+1) % 3`` to vertex
  ``k = (i+2) % 3``.  Its unit tangent ``t_i`` points from ``a_j`` to ``a_k``
  and its normal ``n_i`` is outward, so that ``n_i x t_i > 0``.
* A global edge stores its vertices ``(v0, v1)`` so that the global tangent
  ``t_e`` points from ``v0`` to ``v1``.  The global normal ``n_e`` is ``t_e``
  rotated by -90 degrees; it points out of ``edge_cells[e, 0]`` (the incident
  cell with the smaller index) and is outward on the boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

DEFAULT_BOUNDARY_TAG = "boundary"


class MeshError(ValueError):
    """Raised for invalid triangulation input."""


@dataclass(frozen=True)
class CellGeometry:
    """Geometric quantities of a single triangle.

    Arrays are indexed by local vertex/edge number.  ``grad_lambda[i]`` is the
    gradient of the barycentric coordinate of vertex ``i``.
    """

    vertices: np.ndarray  # (3, 2)
    area: float
    lengths: np.ndarray  # (3,)
    normals: np.ndarray  # (3, 2), outward
    tangents: np.ndarray  # (3, 2), n x t > 0
    grad_lambda: np.ndarray  # (3, 2)

    @property
    def diameter(self) -> float:
        return float(self.lengths.max())

    def to_cartesian(self, bary: np.ndarray) -> np.ndarray:
        return np.asarray(bary) @ self.vertices


@dataclass(frozen=True)
class GeometryArrays:
    """Vectorised :class:`CellGeometry` for every cell of a mesh."""

    vertices: np.ndarray  # (nc, 3, 2)
    area: np.ndarray  # (nc,)
    lengths: np.ndarray  # (nc, 3)
    normals: np.ndarray  # (nc, 3, 2)
    tangents: np.ndarray  # (nc, 3, 2)
    grad_lambda: np.ndarray  # (nc, 3, 2)


def compute_geometry(coords: np.ndarray) -> GeometryArrays:
    """Geometry of triangles given as an ``(nc, 3, 2)`` coordinate array."""
    coords = np.asarray(coords, dtype=float)
    a0, a1, a2 = coords[:, 0], coords[:, 1], coords[:, 2]
    d1 = a1 - a0
    d2 = a2 - a0
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(area <= 0):
        bad = np.flatnonzero(area <= 0)
        raise MeshError(f"degenerate or inverted cells: {bad[:10].tolist()}")
    # edge i runs from vertex (i+1)%3 to (i+2)%3
    vec = np.stack([a2 - a1, a0 - a2, a1 - a0], axis=1)
    lengths = np.linalg.norm(vec, axis=2)
    tangents = vec / lengths[:, :, None]
    normals = np.stack([tangents[:, :, 1], -tangents[:, :, 0]], axis=2)
    # grad lambda_i = -l_i n_i / (2 S)
    grad_lambda = -lengths[:, :, None] * normals / (2.0 * area[:, None, None])
    return GeometryArrays(coords, area, lengths, normals, tangents, grad_lambda)


class Triangulation:
    """An immutable conforming triangulation of a connected planar domain.

    Build instances with :func:`build_triangulation` (or a generator) rather
    than calling the constructor directly.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        cells: np.ndarray,
        edges: np.ndarray,
        edge_cells: np.ndarray,
        cell_edges: np.ndarray,
        cell_edge_sign: np.ndarray,
        boundary_tags: Mapping[int, str],
    ):
        self.vertices = vertices
        self.cells = cells
        self.edges = edges
        self.edge_cells = edge_cells
        self.cell_edges = cell_edges
        self.cell_edge_sign = cell_edge_sign
        self.boundary_tags = dict(boundary_tags)
        for arr in (vertices, cells, edges, edge_cells, cell_edges, cell_edge_sign):
            arr.setflags(write=False)

    def __repr__(self) -> str:
        return (
            f"Triangulation(vertices={self.num_vertices}, cells={self.num_cells}, "
            f"edges={self.num_edges}, h={self.h:.4g})"
        )

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    @cached_property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] >= 0)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edges])

    @cached_property
    def is_boundary_vertex(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask

    @cached_property
    def geometry(self) -> GeometryArrays:
        return compute_geometry(self.vertices[self.cells])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    @cached_property
    def edge_tangents(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return d / self.edge_lengths[:, None]

    @cached_property
    def edge_normals(self) -> np.ndarray:
        t = self.edge_tangents
        return np.column_stack([t[:, 1], -t[:, 0]])

    @property
    def h(self) -> float:
        """Mesh size: the longest edge."""
        return float(self.edge_lengths.max())

    @property
    def area(self) -> float:
        return float(self.geometry.area.sum())

    @cached_property
    def vertex_cells(self) -> sp.csr_matrix:
        """Sparse incidence (vertex x cell)."""
        nc = self.num_cells
        rows = self.cells.ravel()
        cols = np.repeat(np.arange(nc), 3)
        return sp.csr_matrix(
            (np.ones(3 * nc, dtype=np.int8), (rows, cols)),
            shape=(self.num_vertices, nc),
        )

    def cells_of_vertex(self, v: int) -> np.ndarray:
        m = self.vertex_cells
        return m.indices[m.indptr[v] : m.indptr[v + 1]]

    def edges_with_tags(self, tags: Iterable[str]) -> np.ndarray:
        tags = set(tags)
        return np.array(
            sorted(e for e, t in self.boundary_tags.items() if t in tags), dtype=int
        )

    @property
    def tag_names(self) -> set[str]:
        return set(self.boundary_tags.values())

    def edge_between(self, c0: int, c1: int) -> int | None:
        """Global index of the edge shared by two cells, or ``None``."""
        for e in self.cell_edges[c0]:
            if c1 in self.edge_cells[e]:
                return int(e)
        return None

    def submesh(self, cells: Sequence[int]) -> "Triangulation":
        """Triangulation made of a subset of cells (vertices renumbered).

        Cell order is preserved; boundary edges of the patch that are boundary
        edges of the parent keep their tag, new ones get ``"patch"``.
        """
        cells = np.asarray(cells, dtype=int)
        used = np.unique(self.cells[cells])
        renum = -np.ones(self.num_vertices, dtype=int)
        renum[used] = np.arange(len(used))
        tags = {}
        for e, tag in self.boundary_tags.items():
            a, b = self.edges[e]
            if renum[a] >= 0 and renum[b] >= 0 and self.edge_cells[e, 0] in cells:
                tags[(int(renum[a]), int(renum[b]))] = tag
        return build_triangulation(
            self.vertices[used], renum[self.cells[cells]], tags, default_tag="patch"
        )


def build_triangulation(
    vertices,
    cells,
    boundary_tags=None,
    *,
    default_tag: str = DEFAULT_BOUNDARY_TAG,
) -> Triangulation:
    """Validate input and build the edge/adjacency tables.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    cells : array_like, shape (nc, 3)
        Vertex indices; clockwise cells are reordered.
    boundary_tags : mapping or iterable, optional
        Either ``{(i, j): tag}`` or an iterable of ``(i, j, tag)`` triples
        naming boundary edges by their end vertices.  Untagged boundary edges
        receive `default_tag`.
    """
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    cells = np.array(cells, dtype=np.int64).reshape(-1, 3)
    nv, nc = len(vertices), len(cells)
    if nc == 0:
        raise MeshError("triangulation has no cells")
    if cells.min() < 0 or cells.max() >= nv:
        raise MeshError("cell vertex index out of range")
    if np.any(
        (cells[:, 0] == cells[:, 1])
        | (cells[:, 1] == cells[:, 2])
        | (cells[:, 0] == cells[:, 2])
    ):
        raise MeshError("cell with repeated vertex")
    if len(np.unique(np.sort(cells, axis=1), axis=0)) != nc:
        raise MeshError("duplicate cells")
    unused = np.setdiff1d(np.arange(nv), cells.ravel())
    if len(unused):
        raise MeshError(f"dangling vertices not used by any cell: {unused[:10].tolist()}")

    p = vertices[cells]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    scale = max(np.ptp(vertices[:, 0]), np.ptp(vertices[:, 1]), 1e-300) ** 2
    if np.any(np.abs(signed) <= 1e-14 * scale):
        bad = np.flatnonzero(np.abs(signed) <= 1e-14 * scale)
        raise MeshError(f"zero-area cells: {bad[:10].tolist()}")
    cw = signed < 0
    cells[cw] = cells[cw][:, [0, 2, 1]]

    # side i of cell c runs (cells[c, i+1], cells[c, i+2])
    start = cells[:, [1, 2, 0]].ravel()
    end = cells[:, [2, 0, 1]].ravel()
    key = np.minimum(start, end) * nv + np.maximum(start, end)
    uniq, first, inverse, counts = np.unique(
        key, return_index=True, return_inverse=True, return_counts=True
    )
    if np.any(counts > 2):
        bad = uniq[counts > 2]
        pairs = [(int(k // nv), int(k % nv)) for k in bad[:5]]
        raise MeshError(f"non-manifold edges (>= 3 incident cells): {pairs}")
    ne = len(uniq)
    edges = np.column_stack([start[first], end[first]])
    edge_cells = -np.ones((ne, 2), dtype=np.int64)
    edge_cells[:, 0] = first // 3
    occurrence = np.arange(3 * nc)
    second = occurrence != first[inverse]
    edge_cells[inverse[second], 1] = occurrence[second] // 3
    # the two incident cells must traverse the shared edge in opposite directions
    if np.any(start[second] != end[first[inverse[second]]]):
        raise MeshError("overlapping cells: a shared edge has inconsistent orientation")
    cell_edges = inverse.reshape(nc, 3)
    cell_edge_sign = np.where(second, -1, 1).reshape(nc, 3)

    interior = edge_cells[:, 1] >= 0
    adj = sp.coo_matrix(
        (np.ones(interior.sum()), (edge_cells[interior, 0], edge_cells[interior, 1])),
        shape=(nc, nc),
    )
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise MeshError(f"mesh is not connected ({ncomp} components)")

    edge_index = {int(k): e for e, k in enumerate(uniq)}
    tags: dict[int, str] = {}
    if boundary_tags is not None:
        items = (
            [(a, b, t) for (a, b), t in boundary_tags.items()]
            if isinstance(boundary_tags, Mapping)
            else list(boundary_tags)
        )
        for a, b, tag in items:
            a, b = int(a), int(b)
            e = edge_index.get(min(a, b) * nv + max(a, b))
            if e is None:
                raise MeshError(f"tagged pair ({a}, {b}) is not an edge")
            if interior[e]:
                raise MeshError(f"tagged pair ({a}, {b}) is an interior edge")
            tags[e] = str(tag)
    for e in np.flatnonzero(~interior):
        tags.setdefault(int(e), default_tag)

    return Triangulation(
        vertices, cells, edges, edge_cells, cell_edges, cell_edge_sign, tags
    )


def refine_uniform(mesh: Triangulation) -> Triangulation:
    """Red refinement: every cell is split into four by its edge midpoints."""
    nv = mesh.num_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    a = mesh.cells
    m = nv + mesh.cell_edges  # m[:, i] is the midpoint of the edge opposite a_i
    cells = np.concatenate(
        [
            np.column_stack([a[:, 0], m[:, 2], m[:, 1]]),
            np.column_stack([a[:, 1], m[:, 0], m[:, 2]]),
            np.column_stack([a[:, 2], m[:, 1], m[:, 0]]),
            np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
        ]
    )
    # keep children of one parent next to each other
    nc = mesh.num_cells
    cells = cells.reshape(4, nc, 3).transpose(1, 0, 2).reshape(-1, 3)
    tags = {}
    for e, tag in mesh.boundary_tags.items():
        v0, v1 = mesh.edges[e]
        tags[(int(v0), nv + e)] = tag
        tags[(nv + e, int(v1))] = tag
    return build_triangulation(vertices, cells, tags)


def refine(mesh: Triangulation, times: int) -> Triangulation:
    for _ in range(times):
        mesh = refine_uniform(mesh)
    return mesh


def check_assumption_a(mesh: Triangulation) -> list[int]:
    """Cells with no vertex in the interior of the domain."""
    on_boundary = mesh.is_boundary_vertex[mesh.cells]
    return np.flatnonzero(on_boundary.all(axis=1)).tolist()


def warn_assumption_a(mesh: Triangulation) -> list[int]:
    bad = check_assumption_a(mesh)
    if bad:
        log.warning(
            "%d cell(s) have all vertices on the boundary (first: %s); "
            "stability theory does not cover this mesh",
            len(bad),
            bad[:5],
        )
    return bad


def cell_geometry(mesh: Triangulation, cell: int) -> CellGeometry:
    g = mesh.geometry
    return CellGeometry(
        g.vertices[cell],
        float(g.area[cell]),
        g.lengths[cell],
        g.normals[cell],
        g.tangents[cell],
        g.grad_lambda[cell],
    )


def triangle_geometry(vertices) -> CellGeometry:
    """:class:`CellGeometry` of a free-standing (counter-clockwise) triangle."""
    g = compute_geometry(np.asarray(vertices, dtype=float)[None])
    return CellGeometry(
        g.vertices[0], float(g.area[0]), g.lengths[0], g.normals[0],
        g.tangents[0], g.grad_lambda[0],
    )


# ---------------------------------------------------------------------------
# generators


def _tag_by_position(
    mesh_vertices: np.ndarray, cells: np.ndarray, classify: Callable[[float, float], str]
) -> Triangulation:
    mesh = build_triangulation(mesh_vertices, cells)
    tags = {}
    for e in mesh.boundary_edges:
        x, y = mesh.vertices[mesh.edges[e]].mean(axis=0)
        a, b = mesh.edges[e]
        tags[(int(a), int(b))] = classify(x, y)
    return build_triangulation(mesh.vertices, mesh.cells, tags)


def _split_quads(points: np.ndarray, quads: np.ndarray, diagonal: str):
    """Triangulate quads ``(p00, p10, p11, p01)`` given counter-clockwise."""
    if diagonal not in ("same", "alternating", "crisscross"):
        raise ValueError(f"unknown diagonal rule {diagonal!r}")
    q = np.asarray(quads)
    if diagonal == "crisscross":
        centers = points[q].mean(axis=1)
        c = len(points) + np.arange(len(q))
        cells = np.concatenate(
            [
                np.column_stack([q[:, 0], q[:, 1], c]),
                np.column_stack([q[:, 1], q[:, 2], c]),
                np.column_stack([q[:, 2], q[:, 3], c]),
                np.column_stack([q[:, 3], q[:, 0], c]),
            ]
        )
        nq = len(q)
        cells = cells.reshape(4, nq, 3).transpose(1, 0, 2).reshape(-1, 3)
        return np.vstack([points, centers]), cells
    slash = np.concatenate(
        [q[:, [0, 1, 2]][:, None], q[:, [0, 2, 3]][:, None]], axis=1
    )
    back = np.concatenate(
        [q[:, [0, 1, 3]][:, None], q[:, [1, 2, 3]][:, None]], axis=1
    )
    if diagonal == "same":
        cells = slash
    else:
        ij = points[q[:, 0]]
        h = np.linalg.norm(points[q[:, 1]] - points[q[:, 0]], axis=1)
        parity = (np.rint(ij[:, 0] / h) + np.rint(ij[:, 1] / h)).astype(int) % 2
        cells = np.where(parity[:, None, None] == 0, slash, back)
    return points, cells.reshape(-1, 3)


def _grid(nx: int, ny: int, x0: float, x1: float, y0: float, y1: float):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    points = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    quads = np.column_stack(
        [
            idx[:-1, :-1].ravel(),
            idx[:-1, 1:].ravel(),
            idx[1:, 1:].ravel(),
            idx[1:, :-1].ravel(),
        ]
    )
    return points, quads


def structured_square_mesh(
    n: int, diagonal: str = "same", bounds=(0.0, 1.0, 0.0, 1.0)
) -> Triangulation:
    """``n x n`` squares, each split by `diagonal`.

    ``diagonal`` is ``"same"`` (all along (0,0)-(1,1)), ``"alternating"``
    (checkerboard) or ``"crisscross"`` (four triangles around the square's
    center).  Boundary edges are tagged ``bottom``, ``right``, ``top``,
    ``left``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, x1, y0, y1 = bounds
    points, quads = _grid(n, n, x0, x1, y0, y1)
    points, cells = _split_quads(points, quads, diagonal)
    tol = 1e-12 * max(x1 - x0, y1 - y0)

    def side(x, y):
        if abs(y - y0) < tol:
            return "bottom"
        if abs(x - x1) < tol:
            return "right"
        if abs(y - y1) < tol:
            return "top"
        return "left"

    return _tag_by_position(points, cells, side)


def crisscross_mesh(n: int = 1) -> Triangulation:
    return structured_square_mesh(n, "crisscross")


def forward_step_mesh(resolution: int = 2, diagonal: str = "crisscross") -> Triangulation:
    """Forward-facing step (0,4)x(0,2) minus [2,4]x[0,1].

    `resolution` squares per unit length.  Tags: ``inflow`` (x=0),
    ``outflow`` (x=4) and ``wall``.
    """
    r = int(resolution)
    if r < 1:
        raise ValueError("resolution must be >= 1")
    points, quads = _grid(4 * r, 2 * r, 0.0, 4.0, 0.0, 2.0)
    lower_left = points[quads[:, 0]]
    keep = ~((lower_left[:, 0] >= 2.0 - 1e-12) & (lower_left[:, 1] < 1.0 - 1e-12))
    quads = quads[keep]
    used = np.unique(quads)
    renum = -np.ones(len(points), dtype=int)
    renum[used] = np.arange(len(used))
    points, cells = _split_quads(points[used], renum[quads], diagonal)

    def side(x, y):
        if abs(x) < 1e-12:
            return "inflow"
        if abs(x - 4.0) < 1e-12:
            return "outflow"
        return "wall"

    return _tag_by_position(points, cells, side)


def fan_mesh(m: int, rng: np.random.Generator | None = None, jitter: float = 0.0) -> Triangulation:
    """An m-cell vertex-centred fan around the origin (the center is vertex 0).

    With `rng` the ring vertices get random radii in [0.6, 1.4] and angular
    jitter of up to ``jitter`` times the mean angular spacing.
    """
    if m < 3:
        raise ValueError("a fan needs at least 3 cells")
    theta = 2 * np.pi * np.arange(m) / m
    radius = np.ones(m)
    if rng is not None:
        theta = theta + jitter * (2 * np.pi / m) * rng.uniform(-0.5, 0.5, m)
        radius = rng.uniform(0.6, 1.4, m)
    ring = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    vertices = np.vstack([[0.0, 0.0], ring])
    cells = [(0, 1 + s, 1 + (s + 1) % m) for s in range(m)]
    return build_triangulation(vertices, cells)


# ---------------------------------------------------------------------------
# patches


@dataclass(frozen=True)
class Macroelement:
    """Cells around an interior vertex, ordered clockwise.

    ``edges[s]`` is the interior edge shared by ``cells[s-1]`` and
    ``cells[s]`` (cyclically), so ``edges[0]`` joins the last and first cell.
    With the center at local vertex ``i`` of a fan cell, ``edges[s]`` is its
    local edge ``j = (i+1) % 3`` and ``edges[s+1]`` its local edge ``k``.
    The clockwise order is the one for which the explicit kernel fields of
    :mod:`consfem.localkernel` are conforming.
    """

    center: int
    cells: tuple[int, ...]
    edges: tuple[int, ...]
    lengths: np.ndarray
    areas: np.ndarray

    @property
    def m(self) -> int:
        return len(self.cells)


def extract_macroelement(mesh: Triangulation, vertex: int) -> Macroelement:
    if mesh.is_boundary_vertex[vertex]:
        raise MeshError(f"vertex {vertex} lies on the boundary")
    ring = mesh.cells_of_vertex(vertex)
    start = int(ring.min())
    order, shared = [], []
    cell = start
    for _ in range(len(ring)):
        order.append(cell)
        i = int(np.flatnonzero(mesh.cells[cell] == vertex)[0])
        k = (i + 2) % 3
        # the clockwise neighbour around the vertex is across local edge k
        e = int(mesh.cell_edges[cell, k])
        shared.append(e)
        c0, c1 = mesh.edge_cells[e]
        cell = int(c1 if c0 == cell else c0)
        if cell == start:
            break
    if cell != start or len(order) != len(ring):
        raise MeshError(f"cells around vertex {vertex} do not form a closed fan")
    edges = tuple([shared[-1]] + shared[:-1])
    return Macroelement(
        center=int(vertex),
        cells=tuple(order),
        edges=edges,
        lengths=mesh.edge_lengths[list(edges)],
        areas=mesh.geometry.area[order],
    )


@dataclass(frozen=True)
class ChainPatch:
    """A sequence of cells where consecutive cells share an edge.

    ``edges[s]`` joins ``cells[s]`` and ``cells[s+1]``; ``closing_edge`` joins
    the last and first cell when they are adjacent.
    """

    cells: tuple[int, ...]
    edges: tuple[int, ...]
    closing_edge: int | None

    @property
    def closed(self) -> bool:
        return self.closing_edge is not None

    @property
    def interior_edges(self) -> tuple[int, ...]:
        return self.edges + ((self.closing_edge,) if self.closed else ())


def extract_chain_patch(mesh: Triangulation, cells: Sequence[int]) -> ChainPatch:
    cells = tuple(int(c) for c in cells)
    if len(set(cells)) != len(cells):
        raise MeshError("chain repeats a cell")
    edges = []
    for a, b in zip(cells[:-1], cells[1:]):
        e = mesh.edge_between(a, b)
        if e is None:
            raise MeshError(f"cells {a} and {b} are not adjacent")
        edges.append(e)
    closing = mesh.edge_between(cells[-1], cells[0]) if len(cells) > 2 else None
    return ChainPatch(cells, tuple(edges), closing)


# ---------------------------------------------------------------------------
# text mesh format


def write_mesh(mesh: Triangulation, path) -> None:
    """Write the ``nodes / cells / boundary`` text format."""
    lines = [f"nodes {mesh.num_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"cells {mesh.num_cells}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.cells.tolist()]
    lines.append(f"boundary {len(mesh.boundary_tags)}")
    for e in sorted(mesh.boundary_tags):
        a, b = mesh.edges[e]
        lines.append(f"{a} {b} {mesh.boundary_tags[e]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path) -> Triangulation:
    """Parse the ``nodes / cells / boundary`` text format."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc.strerror}") from None
    lines = [
        (n + 1, ln.split("#", 1)[0].strip())
        for n, ln in enumerate(raw)
    ]
    lines = [(n, ln) for n, ln in lines if ln]
    pos = 0

    def header(word):
        nonlocal pos
        if pos >= len(lines):
            raise MeshError(f"{path}: unexpected end of file, expected '{word} N'")
        n, ln = lines[pos]
        parts = ln.split()
        if len(parts) != 2 or parts[0] != word or not parts[1].isdigit():
            raise MeshError(f"{path}:{n}: expected '{word} N', got {ln!r}")
        pos += 1
        return int(parts[1])

    def block(count, width, conv):
        nonlocal pos
        out = []
        for _ in range(count):
            if pos >= len(lines):
                raise MeshError(f"{path}: unexpected end of file inside a block")
            n, ln = lines[pos]
            parts = ln.split()
            if len(parts) != width:
                raise MeshError(f"{path}:{n}: expected {width} fields, got {len(parts)}")
            try:
                out.append(conv(parts))
            except ValueError as exc:
                raise MeshError(f"{path}:{n}: {exc}") from None
            pos += 1
        return out

    nodes = block(header("nodes"), 2, lambda p: (float(p[0]), float(p[1])))
    cells = block(header("cells"), 3, lambda p: tuple(int(x) for x in p))
    bnd = block(header("boundary"), 3, lambda p: (int(p[0]), int(p[1]), p[2]))
    if pos != len(lines):
        raise MeshError(f"{path}:{lines[pos][0]}: trailing content")
    return build_triangulation(nodes, cells, bnd)


def perturbed_mesh(mesh: Triangulation, amplitude: float, seed: int = 0) -> Triangulation:
    """Randomly move interior vertices by up to `amplitude` times the local h."""
    rng = np.random.default_rng(seed)
    v = mesh.vertices.copy()
    interior = ~mesh.is_boundary_vertex
    shift = rng.uniform(-1, 1, size=(interior.sum(), 2)) * amplitude * mesh.h / math.sqrt(2)
    v[interior] += shift
    tags = {(int(a), int(b)): t for e, t in mesh.boundary_tags.items() for a, b in [mesh.edges[e]]}
    return build_triangulation(v, mesh.cells, tags)
