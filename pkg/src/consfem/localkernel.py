"""Divergence-free fields on small patches of cells.

This module computes null-space dimensions of the divergence operator on
patch spaces (all DOFs on the patch boundary set to zero, continuity across
interior edges) and builds the explicit single-cell divergence-free fields
and the "atom" fields supported on four-cell fans and closed three-cell
triples.

Single-cell fields live on a cell ``T`` with a distinguished vertex ``a_i``
(the fan center) and its two edges ``e_j``, ``e_k`` through ``a_i``; the
local edge numbering is that of :mod:`consfem.element`.  All of them are
divergence-free and have vanishing DOFs on the edge ``e_i`` opposite the
center.  Chains of cells around a vertex are taken in clockwise order, so
that ``T_s`` and ``T_{s+1}`` share the local edge ``k`` of ``T_s`` and the
local edge ``j`` of ``T_{s+1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .assembly import assemble_div
from .element import NORMAL_L1, NORMAL_L2, NORMAL_MEAN, TANGENT_MEAN
from .mesh import MeshError, Triangulation, build_triangulation, cell_geometry
from .space import PressureSpace, VelocitySpace

ZERO_THRESHOLD = 1e-9
REQUIRED_GAP = 1e3


# ---------------------------------------------------------------------------
# null-space dimensions


@dataclass
class KernelReport:
    """Outcome of a numerical null-space dimension count."""

    description: str
    nullity: int
    nullity_normal_free: int | None
    expected: str
    singular_values: np.ndarray
    gap: float
    stable: bool
    columns: int = 0

    @property
    def conclusive(self) -> bool:
        return self.gap >= REQUIRED_GAP and self.stable

    def as_dict(self) -> dict:
        return {
            "description": self.description,
            "nullity": self.nullity,
            "nullity_normal_free": self.nullity_normal_free,
            "expected": self.expected,
            "gap": self.gap,
            "stable": self.stable,
            "conclusive": self.conclusive,
            "columns": self.columns,
            "singular_value_tail": self.singular_values[-8:].tolist(),
        }


def numerical_nullity(matrix: np.ndarray, threshold: float = ZERO_THRESHOLD):
    """Nullity of a dense matrix by SVD, its spectral gap and threshold stability.

    Returns ``(nullity, gap, stable, singular_values)``.  ``gap`` is the ratio
    of the smallest singular value counted as nonzero to the largest counted
    as zero (machine epsilon times the largest if none is zero).  ``stable``
    tells whether the count is unchanged for thresholds ten times smaller
    and larger.
    """
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    ncols = A.shape[1]
    if ncols == 0:
        return 0, np.inf, True, np.zeros(0)
    sv = np.linalg.svd(A, compute_uv=False) if A.shape[0] else np.zeros(0)
    smax = sv[0] if len(sv) and sv[0] > 0 else 1.0

    def count(thr):
        return ncols - int(np.sum(sv > thr * smax))

    nullity = count(threshold)
    rank = ncols - nullity
    small = sv[rank] if rank < len(sv) else np.finfo(float).eps * smax
    big = sv[rank - 1] if rank > 0 else smax
    gap = float(big / max(small, np.finfo(float).tiny))
    stable = count(threshold / 10) == nullity == count(threshold * 10)
    return nullity, gap, stable, sv


def patch_divergence_matrix(
    patch: Triangulation,
    free_edges: Iterable[int] = (),
    zero_normal_means: Sequence[int] = (),
):
    """Divergence operator on the patch space.

    DOFs on patch-boundary edges are constrained except on `free_edges`
    (patch edge indices).  Interior edges listed in `zero_normal_means`
    additionally have their normal-mean DOF fixed to zero.  Returns the dense
    matrix ``(div phi_u, q)`` for the unconstrained DOFs ``u`` against the
    discontinuous P1 test space, and the list of those DOFs.
    """
    free_edges = set(int(e) for e in free_edges)
    dirichlet = set(patch.boundary_tags) - free_edges
    # tag the boundary so that the free edges can be left out of the Dirichlet set
    tags = {}
    for e, tag in patch.boundary_tags.items():
        a, b = patch.edges[e]
        tags[(int(a), int(b))] = "free" if e in free_edges else "closed"
    tagged = build_triangulation(patch.vertices, patch.cells, tags)
    space = VelocitySpace(tagged, ["closed"] if dirichlet else [])
    B = assemble_div(space, PressureSpace(tagged, mean_zero=False)).toarray()
    keep = np.ones(space.dim, dtype=bool)
    keep[space.constrained] = False
    for e in zero_normal_means:
        keep[space.edge_dofs[e, NORMAL_MEAN]] = False
    cols = np.flatnonzero(keep)
    return B[:, cols], cols, space


def kernel_dimension(
    patch: Triangulation,
    free_edges: Iterable[int] = (),
    description: str = "",
    expected: str = "",
) -> KernelReport:
    """Dimension of the divergence-free subspace of a patch space.

    Also counts the subspace with every interior normal-mean DOF set to zero.
    """
    B, cols, _ = patch_divergence_matrix(patch, free_edges)
    nullity, gap, stable, sv = numerical_nullity(B)
    Bn, _, _ = patch_divergence_matrix(patch, free_edges, patch.interior_edges)
    nullity_n, gap_n, stable_n, _ = numerical_nullity(Bn)
    return KernelReport(
        description,
        nullity,
        nullity_n,
        expected,
        sv,
        min(gap, gap_n),
        stable and stable_n,
        len(cols),
    )


# ---------------------------------------------------------------------------
# explicit single-cell fields


def _center_local_index(mesh: Triangulation, cell: int, vertex: int) -> int:
    where = np.flatnonzero(mesh.cells[cell] == vertex)
    if not len(where):
        raise MeshError(f"cell {cell} does not contain vertex {vertex}")
    return int(where[0])


def single_cell_fields(geom, i: int) -> dict[str, np.ndarray]:
    """Local coefficient vectors of the five divergence-free fields.

    With ``j = (i+1) % 3`` and ``k = (i+2) % 3`` the keys are ``"j"``,
    ``"k"`` (one-edge fields), ``"jk"``, ``"kj"`` (two-edge fields whose
    second normal Legendre moment sits on the first named edge) and ``"a"``
    (the field with nonzero normal means).
    """
    j, k = (i + 1) % 3, (i + 2) % 3
    l = geom.lengths
    li, lj, lk = l[i], l[j], l[k]
    S = geom.area

    def phi(edge, kind):
        v = np.zeros(12)
        v[4 * edge + kind] = 1.0
        return v

    w = {}
    w["j"] = 2 * S / (3 * lj**2) * phi(j, NORMAL_L1) - phi(j, TANGENT_MEAN)
    w["k"] = -2 * S / (3 * lk**2) * phi(k, NORMAL_L1) + phi(k, TANGENT_MEAN)
    w["jk"] = (
        -1 / (3 * lj) * phi(j, NORMAL_L1)
        + 1 / (10 * lj) * phi(j, NORMAL_L2)
        - 2 / (3 * lk) * phi(k, NORMAL_L1)
    )
    w["kj"] = (
        -2 / (3 * lj) * phi(j, NORMAL_L1)
        - 1 / (3 * lk) * phi(k, NORMAL_L1)
        - 1 / (10 * lk) * phi(k, NORMAL_L2)
    )
    c1 = (-li**2 * lj**2 + 2 * li**2 * lk**2 + lj**4 + 3 * lj**2 * lk**2 - 2 * lk**4) / (
        12 * lj**3 * lk**2
    )
    c2 = (li**2 - lj**2 + 3 * lk**2) / (40 * lj * lk**2)
    w["a"] = (
        -1 / lj * phi(j, NORMAL_MEAN)
        + c1 * phi(j, NORMAL_L1)
        + c2 * phi(j, NORMAL_L2)
        + 1 / lk * phi(k, NORMAL_MEAN)
    )
    return w


class _FanCell:
    """A cell seen from a center vertex: maps global edges to roles j / k."""

    def __init__(self, mesh: Triangulation, cell: int, center: int):
        self.cell = cell
        self.i = _center_local_index(mesh, cell, center)
        j, k = (self.i + 1) % 3, (self.i + 2) % 3
        self.role = {int(mesh.cell_edges[cell, j]): "j", int(mesh.cell_edges[cell, k]): "k"}
        self.w = single_cell_fields(cell_geometry(mesh, cell), self.i)

    def one(self, edge: int) -> np.ndarray:
        """Field supported on one edge through the center."""
        return self.w[self.role[edge]]

    def two(self, first: int, second: int) -> np.ndarray:
        """Two-edge field with its second Legendre moment on `first`."""
        return self.w[self.role[first] + self.role[second]]


def _common_vertex(mesh: Triangulation, cells: Sequence[int]) -> int:
    common = set(mesh.cells[cells[0]].tolist())
    for c in cells[1:]:
        common &= set(mesh.cells[c].tolist())
    if len(common) != 1:
        raise MeshError("cells of the patch do not share exactly one common vertex")
    return common.pop()


def _clockwise(mesh: Triangulation, cells: Sequence[int], center: int) -> list[int]:
    """Return `cells` ordered clockwise around `center` (reversing if needed)."""
    c0, c1 = cells[0], cells[1]
    i = _center_local_index(mesh, c0, center)
    k_edge = mesh.cell_edges[c0, (i + 2) % 3]
    if c1 in mesh.edge_cells[k_edge]:
        return list(cells)
    return list(cells)[::-1]


def atom_function(mesh: Triangulation, cells: Sequence[int], space: VelocitySpace | None = None):
    """Explicit divergence-free field on a four-cell fan or a closed triple.

    `cells` are consecutive cells around a common vertex (4 cells whose first
    and last are not adjacent, or 3 pairwise adjacent cells).  Returns the
    global DOF vector in `space` (a velocity space on `mesh`, built with the
    whole boundary constrained when omitted).
    """
    cells = [int(c) for c in cells]
    if len(cells) not in (3, 4):
        raise ValueError("atom functions live on 4-cell fans or closed 3-cell triples")
    center = _common_vertex(mesh, cells)
    for a, b in zip(cells[:-1], cells[1:]):
        if mesh.edge_between(a, b) is None:
            raise MeshError(f"cells {a} and {b} are not adjacent")
    cells = _clockwise(mesh, cells, center)
    space = space or VelocitySpace(mesh)
    d = mesh.edge_lengths
    S = mesh.geometry.area
    fan = [_FanCell(mesh, c, center) for c in cells]
    local: dict[int, np.ndarray] = {}
    if len(cells) == 4:
        if mesh.edge_between(cells[3], cells[0]) is not None:
            raise MeshError("first and last cells of a four-cell fan must not be adjacent")
        T1, T2, T3, T4 = cells
        e2, e3, e4 = (mesh.edge_between(a, b) for a, b in zip(cells[:-1], cells[1:]))
        r = -d[e2] / (S[T1] + S[T2])
        s = d[e4] / (S[T3] + S[T4])
        local[T1] = r * fan[0].one(e2)
        local[T2] = r * fan[1].one(e2) - fan[1].two(e3, e2)
        local[T3] = -fan[2].two(e3, e4) + s * fan[2].one(e4)
        local[T4] = s * fan[3].one(e4)
    else:
        T1, T2, T3 = cells
        e2 = mesh.edge_between(T1, T2)
        e3 = mesh.edge_between(T2, T3)
        e1 = mesh.edge_between(T3, T1)
        if e1 is None:
            raise MeshError("a closed triple needs its first and last cells adjacent")
        r = -d[e2] / (S[T1] + S[T2])
        s = d[e1] / (S[T3] + S[T1])
        local[T1] = r * fan[0].one(e2) + s * fan[0].one(e1)
        local[T2] = r * fan[1].one(e2) - fan[1].two(e3, e2)
        local[T3] = -fan[2].two(e3, e1) + s * fan[2].one(e1)
    return scatter_local(space, local)


def scatter_local(space: VelocitySpace, local: dict[int, np.ndarray]) -> np.ndarray:
    """Global DOF vector from per-cell local coefficients.

    Raises :class:`ValueError` when two cells disagree on a shared DOF by
    more than 1e-9 relative (the field would not be in the global space).
    """
    out = np.zeros(space.dim)
    seen = np.zeros(space.dim, dtype=bool)
    scale = max(max(np.abs(v).max() for v in local.values()), 1e-300)
    for cell, coeffs in local.items():
        g = np.asarray(coeffs) * space.cell_signs[cell]
        dofs = space.cell_dofs[cell]
        clash = seen[dofs] & (np.abs(out[dofs] - g) > 1e-9 * scale)
        if clash.any():
            raise ValueError(f"local fields disagree on DOFs {dofs[clash].tolist()}")
        out[dofs] = g
        seen[dofs] = True
    # cells outside the support see zero; the shared DOFs must vanish there
    support = set(local)
    for cell in range(space.mesh.num_cells):
        if cell in support:
            continue
        dofs = space.cell_dofs[cell]
        if np.any(np.abs(out[dofs]) > 1e-9 * scale):
            raise ValueError(f"field does not vanish on the boundary of its support (cell {cell})")
    return out


def local_restriction(space: VelocitySpace, coeffs: np.ndarray, cell: int) -> np.ndarray:
    return np.asarray(coeffs)[space.cell_dofs[cell]] * space.cell_signs[cell]


def null_space_residual(matrix: np.ndarray, vector: np.ndarray) -> float:
    """Distance of the numeric null space of `matrix` from ``span{vector}``.

    The null space is spanned by the right singular vectors below the zero
    threshold; the result is the norm of the component of a unit basis
    vector orthogonal to `vector` (maximised over the null space basis).
    """
    _, sv, vt = np.linalg.svd(matrix)
    smax = sv[0] if len(sv) else 1.0
    rank = int(np.sum(sv > ZERO_THRESHOLD * smax))
    null = vt[rank:].T
    v = vector / np.linalg.norm(vector)
    resid = null - np.outer(v, v @ null)
    return float(np.linalg.norm(resid, axis=0).max()) if null.shape[1] else float("inf")
