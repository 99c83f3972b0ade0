"""Error norms, convergence rates and stability constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .assembly import (
    assemble_div,
    assemble_gradgrad,
    assemble_mass,
    assemble_pressure_mass,
    assemble_symgrad,
    quadrature_points,
)
from .quadrature import quadrature_triangle

ERROR_DEGREE = 8
DENSE_LIMIT = 4000


@dataclass
class ErrorReport:
    """Velocity and pressure errors on one mesh.

    ``energy`` is ``sqrt(eps2 |e|_{1,h}^2 + ||e||_0^2 + ||div e||_0^2)``.
    """

    h: float
    l2: float
    h1: float
    div: float
    pressure: float
    energy: float
    eps2: float = 1.0
    dofs: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def compute_errors(
    vspace,
    pspace,
    velocity: np.ndarray,
    pressure: np.ndarray | None,
    u: Callable,
    grad_u: Callable,
    p: Callable | None = None,
    eps2: float = 1.0,
    degree: int = ERROR_DEGREE,
    mean_free_pressure: bool = True,
) -> ErrorReport:
    """Cellwise-quadrature errors of a discrete solution against exact fields.

    ``u(X)`` returns ``(n, 2)``, ``grad_u(X)`` returns ``(n, 2, 2)`` with
    ``grad_u[:, i, j] = d u_i / d x_j`` and ``p(X)`` returns ``(n,)``.  With
    `mean_free_pressure` both pressures are compared after removing their
    means.
    """
    mesh = vspace.mesh
    bary = quadrature_triangle(degree).points
    X, W = quadrature_points(mesh, degree)
    pts = X.reshape(-1, 2)
    uh, guh = vspace.values_at(velocity, bary)
    ue = np.asarray(u(pts), dtype=float).reshape(uh.shape)
    ge = np.asarray(grad_u(pts), dtype=float).reshape(guh.shape)
    eu = ue - uh
    eg = ge - guh
    ediv = np.trace(eg, axis1=-2, axis2=-1)
    l2 = math.sqrt(max(float((W * (eu**2).sum(-1)).sum()), 0.0))
    h1 = math.sqrt(max(float((W * (eg**2).sum((-1, -2))).sum()), 0.0))
    div = math.sqrt(max(float((W * ediv**2).sum()), 0.0))
    perr = 0.0
    if p is not None and pressure is not None:
        ph = pspace.values_at(pressure, bary)
        pe = np.asarray(p(pts), dtype=float).reshape(ph.shape)
        if mean_free_pressure:
            area = W.sum()
            pe = pe - (W * pe).sum() / area
            ph = ph - (W * ph).sum() / area
        perr = math.sqrt(max(float((W * (pe - ph) ** 2).sum()), 0.0))
    energy = math.sqrt(eps2 * h1**2 + l2**2 + div**2)
    return ErrorReport(mesh.h, l2, h1, div, perr, energy, eps2, int(vspace.dim + pspace.dim))


def l2_norm(vspace, velocity: np.ndarray, degree: int = 4) -> float:
    bary = quadrature_triangle(degree).points
    _, W = quadrature_points(vspace.mesh, degree)
    uh, _ = vspace.values_at(velocity, bary)
    return math.sqrt(float((W * (uh**2).sum(-1)).sum()))


def broken_h1_seminorm(vspace, velocity: np.ndarray, degree: int = 2) -> float:
    bary = quadrature_triangle(degree).points
    _, W = quadrature_points(vspace.mesh, degree)
    _, g = vspace.values_at(velocity, bary)
    return math.sqrt(float((W * (g**2).sum((-1, -2))).sum()))


def divergence_norm(vspace, velocity: np.ndarray, degree: int = 2) -> float:
    """``||div_h u||_0`` and ``max |div_h u|`` at quadrature points."""
    bary = quadrature_triangle(degree).points
    _, W = quadrature_points(vspace.mesh, degree)
    _, g = vspace.values_at(velocity, bary)
    d = np.trace(g, axis1=-2, axis2=-1)
    return math.sqrt(float((W * d**2).sum()))


def max_divergence(vspace, velocity: np.ndarray, degree: int = 6) -> float:
    _, g = vspace.values_at(velocity, quadrature_triangle(degree).points)
    return float(np.abs(np.trace(g, axis1=-2, axis2=-1)).max())


def convergence_rates(hs: Sequence[float], errors: Sequence[float]) -> list[float | None]:
    """Rates ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``; ``None`` where undefined."""
    hs = list(hs)
    errors = list(errors)
    if len(hs) != len(errors):
        raise ValueError("hs and errors differ in length")
    rates: list[float | None] = []
    for (h0, e0), (h1, e1) in zip(zip(hs, errors), zip(hs[1:], errors[1:])):
        if not h0 > h1 > 0:
            raise ValueError("mesh sizes must be strictly decreasing")
        if e0 <= 0 or e1 <= 0:
            rates.append(None)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


def aggregate_rate(hs: Sequence[float], errors: Sequence[float]) -> float | None:
    """Least-squares-free overall rate between the first and the last level."""
    if len(hs) < 2 or errors[0] <= 0 or errors[-1] <= 0:
        return None
    return math.log(errors[0] / errors[-1]) / math.log(hs[0] / hs[-1])


# ---------------------------------------------------------------------------
# stability constants


@dataclass
class StabilityReport:
    value: float
    eigenvalues: np.ndarray
    velocity_dofs: int
    pressure_dofs: int
    residual: float
    info: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["eigenvalues"] = self.eigenvalues[:20].tolist()
        return d


def _dense(matrix) -> np.ndarray:
    return matrix.toarray() if hasattr(matrix, "toarray") else np.asarray(matrix)


def _check_size(n: int, what: str) -> None:
    if n > DENSE_LIMIT:
        raise ValueError(
            f"{what} has {n} DOFs; dense eigenvalue estimates are limited to "
            f"{DENSE_LIMIT}, use a coarser mesh"
        )
    if n == 0:
        raise ValueError(f"{what} is empty")


def estimate_inf_sup(vspace, pspace, seminorm: bool = False, mean_zero=None) -> StabilityReport:
    """Discrete inf-sup constant from ``B H^{-1} B^T q = lambda Mp q``.

    ``H`` is the Gram matrix of the broken H1 norm on the free velocity DOFs
    (only the seminorm with ``seminorm=True``).  When the pressure space is
    mean-zero the problem is restricted to the mean-zero complement and the
    constant is the square root of the smallest eigenvalue; otherwise the
    smallest eigenvalue of the full space is used.
    """
    free = vspace.free_dofs
    _check_size(len(free), "velocity space")
    _check_size(pspace.dim, "pressure space")
    K = _dense(assemble_gradgrad(vspace))[np.ix_(free, free)]
    H = K if seminorm else K + _dense(assemble_mass(vspace))[np.ix_(free, free)]
    B = _dense(assemble_div(vspace, pspace))[:, free]
    Mp = _dense(assemble_pressure_mass(pspace))
    S = B @ sla.cho_solve(sla.cho_factor(H), B.T)
    S = 0.5 * (S + S.T)
    mean_zero = pspace.mean_zero if mean_zero is None else mean_zero
    if mean_zero:
        Z = sla.null_space(pspace.mean_constraint[None, :])
        Sz, Mz = Z.T @ S @ Z, Z.T @ Mp @ Z
    else:
        Z, Sz, Mz = None, S, Mp
    lam, vec = sla.eigh(Sz, Mz)
    lam0 = max(lam[0], 0.0)
    r = Sz @ vec[:, 0] - lam[0] * (Mz @ vec[:, 0])
    residual = float(np.linalg.norm(r) / max(np.linalg.norm(Sz, 2), 1e-300))
    return StabilityReport(
        math.sqrt(lam0), lam, len(free), pspace.dim, residual,
        {"smallest_eigenvalue": float(lam[0]), "mean_zero": bool(mean_zero)},
    )


def estimate_korn(vspace) -> StabilityReport:
    """Smallest eigenvalue of ``E v = lambda K v`` on the free velocity DOFs.

    ``E`` is the Gram matrix of the cellwise symmetric gradient and ``K`` that
    of the broken gradient.
    """
    if not vspace.dirichlet_tags:
        raise ValueError("the Korn estimate needs a nonempty Dirichlet boundary")
    free = vspace.free_dofs
    _check_size(len(free), "velocity space")
    E = _dense(assemble_symgrad(vspace))[np.ix_(free, free)]
    K = _dense(assemble_gradgrad(vspace))[np.ix_(free, free)]
    lam, vec = sla.eigh(E, K)
    r = E @ vec[:, 0] - lam[0] * (K @ vec[:, 0])
    residual = float(np.linalg.norm(r) / max(np.linalg.norm(E, 2), 1e-300))
    return StabilityReport(float(lam[0]), lam, len(free), 0, residual)
