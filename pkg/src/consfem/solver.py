"""Direct solution of the discrete saddle-point problems and time stepping."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    Operators,
    SaddleSystem,
    assemble_convection,
    assemble_coriolis,
    assemble_load,
    build_system,
    convection_jacobian,
)
from .mesh import Triangulation, warn_assumption_a
from .space import (
    PressureSpace,
    TaylorHoodSpace,
    VelocitySpace,
)

log = logging.getLogger(__name__)

ELEMENTS = ("npp", "taylor-hood")


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed."""


@dataclass
class MixedSolution:
    """Velocity (full DOF vector), pressure and solver diagnostics."""

    velocity: np.ndarray
    pressure: np.ndarray
    vspace: object
    pspace: object
    multiplier: float = 0.0
    info: dict = field(default_factory=dict)


def make_spaces(mesh: Triangulation, element: str = "npp", dirichlet=None, mean_zero=None):
    """Velocity and pressure spaces of one element pair.

    ``mean_zero`` defaults to whether the whole boundary is Dirichlet.
    """
    if element == "npp":
        vspace = VelocitySpace(mesh, dirichlet)
        if mean_zero is None:
            mean_zero = vspace.dirichlet_tags == frozenset(mesh.tag_names)
        return vspace, PressureSpace(mesh, mean_zero)
    if element == "taylor-hood":
        probe = VelocitySpace(mesh, dirichlet)
        if mean_zero is None:
            mean_zero = probe.dirichlet_tags == frozenset(mesh.tag_names)
        vspace = TaylorHoodSpace(mesh, dirichlet, mean_zero)
        return vspace, vspace.pressure
    raise ValueError(f"unknown element {element!r}; expected one of {ELEMENTS}")


def lift(vspace, data) -> np.ndarray:
    """DOF vector carrying the Dirichlet datum on the constrained DOFs."""
    if data is None:
        return np.zeros(vspace.dim)
    return vspace.boundary_values(data)


def _check_compatibility(system: SaddleSystem, u_bc: np.ndarray) -> None:
    if not _all_dirichlet(system.vspace):
        return
    ones = np.ones(system.pspace.dim)
    flux = ones @ (system.B @ u_bc)
    source = ones @ system.rhs_p
    scale = max(abs(flux), abs(source), np.abs(system.rhs_p).sum(), 1.0)
    if abs(flux - source) > 1e-9 * scale:
        raise SolverError(
            f"incompatible data: int g = {source:.3e} but the boundary flux is "
            f"{flux:.3e}; with a fully Dirichlet boundary these must agree"
        )


def _all_dirichlet(vspace) -> bool:
    return vspace.dirichlet_tags == frozenset(vspace.mesh.tag_names)


class SaddleMatrix:
    """Sparse LU of ``[[A, -B^T], [-B, 0]]`` on the free velocity DOFs.

    With a mean-zero constraint ``c . p = 0`` the pressure is determined up
    to a constant.  Instead of bordering the matrix with the dense row ``c``
    (which ruins the fill-reducing ordering) one pressure DOF is pinned: its
    column and its continuity row are dropped.  The dropped row is implied by
    the others for compatible data, and the multiplier of the bordered
    formulation is recovered from its residual.  The pressure is then shifted
    to mean zero.
    """

    def __init__(self, A_ff, B_f, c=None, hint: str = ""):
        self.nu = A_ff.shape[0]
        self.B_f = B_f.tocsr()
        self.c = None if c is None else np.asarray(c, dtype=float)
        self.np = B_f.shape[0]
        if self.c is not None:
            self.pin = int(np.argmax(np.abs(self.c)))
            self.keep = np.delete(np.arange(self.np), self.pin)
            Bk = self.B_f[self.keep]
        else:
            self.pin, self.keep, Bk = None, None, self.B_f
        self.matrix = sp.bmat([[A_ff, -Bk.T], [-Bk, None]], format="csc")
        t0 = time.perf_counter()
        try:
            self.lu = spla.splu(self.matrix, permc_spec="COLAMD", diag_pivot_thresh=0.1)
        except RuntimeError as exc:
            raise SolverError(f"singular saddle-point matrix ({exc}); {hint}") from None
        self.factor_seconds = time.perf_counter() - t0
        self.hint = hint

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def solve(self, r_u: np.ndarray, r_p: np.ndarray, refine_tol: float = 1e-10):
        """Solve ``A u - B^T p = r_u``, ``-B u (+ c lam) = r_p``.

        Returns ``(u, p, lam, relative_residual)``.
        """
        rp = r_p if self.keep is None else r_p[self.keep]
        rhs = np.concatenate([r_u, rp])
        x = self.lu.solve(rhs)
        scale = max(np.linalg.norm(rhs), 1e-300)
        rel = float(np.linalg.norm(self.matrix @ x - rhs) / scale)
        if rel > refine_tol:
            x -= self.lu.solve(self.matrix @ x - rhs)
            rel = float(np.linalg.norm(self.matrix @ x - rhs) / scale)
        if not np.all(np.isfinite(x)):
            raise SolverError(f"non-finite solution; {self.hint}")
        u = x[: self.nu]
        lam = 0.0
        if self.keep is None:
            p = x[self.nu :]
        else:
            p = np.zeros(self.np)
            p[self.keep] = x[self.nu :]
            lam = float((r_p[self.pin] + self.B_f[self.pin].dot(u)[0]) / self.c[self.pin])
            p -= (self.c @ p) / self.c.sum()
        return u, p, lam, rel


def _singularity_hint(system: SaddleSystem) -> str:
    if system.scheme == "stokes" and system.eps2 == 0:
        return "the Stokes scheme needs eps2 > 0"
    if system.c is None and _all_dirichlet(system.vspace):
        return "pressure is determined only up to a constant: enable the mean-zero constraint"
    return "check the boundary conditions and mesh (Assumption A)"


def solve_saddle(system: SaddleSystem, u_bc: np.ndarray | None = None) -> MixedSolution:
    """Solve the saddle-point system by sparse LU on the free velocity DOFs.

    `u_bc` holds the Dirichlet values of the constrained velocity DOFs (zero
    when omitted); other entries are ignored.
    """
    vs, ps = system.vspace, system.pspace
    free = vs.free_dofs
    u_bc = np.zeros(vs.dim) if u_bc is None else np.where(vs.constrained, u_bc, 0.0)
    if system.c is not None:
        _check_compatibility(system, u_bc)
    A = system.A.tocsr()
    B = system.B.tocsr()
    t0 = time.perf_counter()
    K = SaddleMatrix(A[free][:, free], B[:, free], system.c, _singularity_hint(system))
    uf, p, lam, rel = K.solve(system.rhs_u[free] - A[free] @ u_bc, -system.rhs_p + B @ u_bc)
    u = u_bc.copy()
    u[free] = uf
    info = {
        "unknowns": int(K.shape[0]),
        "nnz": int(K.matrix.nnz),
        "relative_residual": rel,
        "solve_seconds": time.perf_counter() - t0,
    }
    return MixedSolution(u, p, vs, ps, lam, info)


# ---------------------------------------------------------------------------
# drivers


def _check_mesh(mesh: Triangulation) -> list[int]:
    return warn_assumption_a(mesh)


def solve_stokes(
    mesh: Triangulation,
    eps2: float,
    f=None,
    g=None,
    bc=None,
    dirichlet=None,
    element: str = "npp",
    ops: Operators | None = None,
) -> MixedSolution:
    """Discrete Stokes problem ``-eps2 lap u + grad p = f``, ``div u = g``."""
    violating = _check_mesh(mesh)
    vspace, pspace = (ops.vspace, ops.pspace) if ops else make_spaces(mesh, element, dirichlet)
    system = build_system("stokes", eps2, vspace, pspace, f, g, ops)
    sol = solve_saddle(system, lift(vspace, bc))
    sol.info["assumption_a_violations"] = len(violating)
    return sol


def solve_brinkman(
    mesh: Triangulation,
    eps2: float,
    f=None,
    g=None,
    bc=None,
    dirichlet=None,
    element: str = "npp",
    ops: Operators | None = None,
) -> MixedSolution:
    """Discrete Brinkman problem ``-eps2 lap u + u + grad p = f``; Darcy when eps2 = 0."""
    violating = _check_mesh(mesh)
    vspace, pspace = (ops.vspace, ops.pspace) if ops else make_spaces(mesh, element, dirichlet)
    scheme = "darcy" if eps2 == 0 else "brinkman"
    system = build_system(scheme, eps2, vspace, pspace, f, g, ops)
    sol = solve_saddle(system, lift(vspace, bc))
    sol.info["assumption_a_violations"] = len(violating)
    return sol


def add_coriolis(system: SaddleSystem, omega: float) -> SaddleSystem:
    """Add the rotation term ``2 omega e_z x u`` implicitly to the velocity block."""
    if omega == 0:
        return system
    C = assemble_coriolis(system.vspace, omega)
    return replace(system, A=(system.A + C).tocsr(), symmetric=False)


# ---------------------------------------------------------------------------
# Navier--Stokes


@dataclass(frozen=True)
class TransientConfig:
    """Time stepping parameters.

    ``scheme`` is ``"cn-newton"`` (Crank--Nicolson with Newton iterations) or
    ``"be-picard"`` (backward Euler with Picard iterations).  With
    ``steady_tol`` set, the run stops once ``||u^{n+1} - u^n||_0 / dt`` falls
    below it.

    The linearised operator (Newton Jacobian or Picard matrix) is factorised
    and reused across iterations and steps until an iteration reduces the
    residual by less than ``refactor_ratio``.  With ``extrapolate`` the
    iteration starts from ``2 u^n - u^{n-1}``.
    """

    dt: float
    t_final: float
    scheme: str = "cn-newton"
    tol: float = 1e-10
    max_iter: int = 50
    steady_tol: float | None = None
    skew: bool = False
    refactor_ratio: float = 0.7
    extrapolate: bool = True

    def __post_init__(self):
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.scheme not in ("cn-newton", "be-picard", "cn-picard", "be-newton"):
            raise ValueError(f"unknown time scheme {self.scheme!r}")

    @property
    def theta(self) -> float:
        return 0.5 if self.scheme.startswith("cn") else 1.0

    @property
    def newton(self) -> bool:
        return self.scheme.endswith("newton")

    @property
    def num_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class Trajectory:
    times: list[float]
    solutions: list[MixedSolution]
    info: dict = field(default_factory=dict)

    @property
    def final(self) -> MixedSolution:
        return self.solutions[-1]


def _timed(value, t):
    """Evaluate a possibly time-dependent datum."""
    if value is None:
        return None
    if callable(value) and getattr(value, "time_dependent", False):
        return value(t)
    return value


def time_dependent(fn):
    """Mark ``fn(t)`` as returning the datum at time ``t``."""
    fn.time_dependent = True
    return fn


def solve_navier_stokes(
    mesh: Triangulation,
    eps2: float,
    f,
    bc,
    config: TransientConfig,
    u0=None,
    element: str = "npp",
    dirichlet=None,
    keep: str = "final",
    callback: Callable | None = None,
) -> Trajectory:
    """Time-dependent Navier--Stokes equations.

    ``f`` and ``bc`` are vector fields (or mappings tag -> field for ``bc``);
    wrap a function of time with :func:`time_dependent` for time-dependent
    data.  ``u0`` is an initial velocity field (interpolated) or a DOF
    vector.  ``keep`` is ``"final"`` or ``"all"``.
    """
    _check_mesh(mesh)
    vspace, pspace = make_spaces(mesh, element, dirichlet)
    ops = Operators.assemble(vspace, pspace)
    free = vspace.free_dofs
    M, K, B = ops.M, ops.K, ops.B.tocsr()
    B_f = B[:, free]
    c = pspace.mean_constraint if pspace.mean_zero else None
    dt, theta = config.dt, config.theta

    def load(t):
        ft = _timed(f, t)
        return assemble_load(vspace, ft) if ft is not None else np.zeros(vspace.dim)

    if u0 is None:
        u = np.zeros(vspace.dim)
    elif callable(u0):
        u = vspace.interpolate(u0)
    else:
        u = np.asarray(u0, dtype=float).copy()
    u = np.where(vspace.constrained, lift(vspace, _timed(bc, 0.0)), u)
    p = np.zeros(pspace.dim)
    F_old = load(0.0)
    N_old = assemble_convection(vspace, u, skew=config.skew) @ u
    times, sols = [0.0], [MixedSolution(u.copy(), p.copy(), vspace, pspace)]
    info = {"nonlinear_iterations": [], "steady_reached": False, "steps": 0, "factorizations": 0}
    K_n, u_prev = None, None
    t = 0.0
    for n in range(config.num_steps):
        t_new = (n + 1) * dt
        F_new = load(t_new)
        u_bc = lift(vspace, _timed(bc, t_new))
        explicit = M @ u / dt - (1 - theta) * (eps2 * (K @ u) + N_old) + theta * F_new + (1 - theta) * F_old
        if u_prev is not None and config.extrapolate:
            uk = np.where(vspace.constrained, u_bc, 2.0 * u - u_prev)
        else:
            uk = np.where(vspace.constrained, u_bc, u)
        converged = False
        residual = last = np.inf
        for it in range(config.max_iter + 1):
            N = assemble_convection(vspace, uk, skew=config.skew)
            R = M @ uk / dt + theta * (eps2 * (K @ uk) + N @ uk) - explicit
            R_f = R[free] - B_f.T @ p
            scale = max(np.linalg.norm(explicit[free]), np.linalg.norm((M @ uk)[free]) / dt, 1e-300)
            residual = max(np.linalg.norm(R_f) / scale, np.linalg.norm(B @ uk) / scale)
            if residual <= config.tol:
                converged = True
                break
            if it == config.max_iter:
                break
            if K_n is None or residual > config.refactor_ratio * last:
                if config.newton:
                    J = M / dt + theta * (eps2 * K + convection_jacobian(vspace, uk, skew=config.skew))
                else:
                    J = M / dt + theta * (eps2 * K + N)
                J = J.tocsr()
                K_n = SaddleMatrix(J[free][:, free], B_f, c, "nonlinear step")
                info["factorizations"] += 1
            last = residual
            # correction with the (possibly lagged) linearisation; the
            # residual of the nonlinear equations decides convergence
            delta, p, _, _ = K_n.solve(-R[free], B @ uk)
            uk = uk.copy()
            uk[free] += delta
        info["nonlinear_iterations"].append(it)
        if not converged:
            raise SolverError(
                f"nonlinear iteration did not converge at t = {t_new:.6g} "
                f"(relative residual {residual:.3e} after {config.max_iter} iterations)"
            )
        du = uk - u
        rate = float(np.sqrt(max(du @ (M @ du), 0.0))) / dt
        u_prev, u = u, uk
        N_old = assemble_convection(vspace, u, skew=config.skew) @ u if theta < 1 else 0.0 * u
        F_old = F_new
        t = t_new
        info["steps"] = n + 1
        info["last_time_derivative"] = rate
        sol = MixedSolution(u.copy(), p.copy(), vspace, pspace)
        if keep == "all":
            times.append(t)
            sols.append(sol)
        else:
            times, sols = [t], [sol]
        if callback is not None:
            callback(t, sol)
        if config.steady_tol is not None and rate <= config.steady_tol:
            info["steady_reached"] = True
            break
    info["final_time"] = t
    return Trajectory(times, sols, info)
