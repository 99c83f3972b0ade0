"""Verification suites for the element, the local kernels and stability.

Each suite takes an :class:`~consfem.config.ExperimentConfig` and returns an
:class:`~consfem.experiments.ExperimentReport` with one check per property.
"""

from __future__ import annotations

import numpy as np

from .analysis import (
    aggregate_rate,
    broken_h1_seminorm,
    compute_errors,
    convergence_rates,
    divergence_norm,
    estimate_inf_sup,
    estimate_korn,
)
from .assembly import quadrature_points
from .config import ExperimentConfig
from .element import dof_matrix
from .experiments import ExperimentReport, _Stage, _fmt, mesh_levels, solve_traveling_wave
from .localkernel import (
    atom_function,
    kernel_dimension,
    numerical_nullity,
    patch_divergence_matrix,
)
from .manufactured import smooth_vortex
from .mesh import (
    Triangulation,
    check_assumption_a,
    extract_macroelement,
    fan_mesh,
    refine_uniform,
    triangle_geometry,
)
from .quadrature import quadrature_triangle
from .solver import TransientConfig, make_spaces, solve_brinkman, solve_stokes
from .space import VelocitySpace

# ---------------------------------------------------------------------------
# helpers


def random_triangle(rng: np.random.Generator, min_area: float = 0.05) -> np.ndarray:
    """Counterclockwise vertices in ``[-1, 1]^2`` with area at least `min_area`."""
    while True:
        p = rng.uniform(-1.0, 1.0, (3, 2))
        area = 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))
        if abs(area) >= min_area:
            return p if area > 0 else p[[0, 2, 1]]


def smooth_field(X: np.ndarray) -> np.ndarray:
    """Fixed smooth (non-polynomial) field used for interpolation rates."""
    x, y = X[:, 0], X[:, 1]
    return np.column_stack([np.exp(x) * np.sin(y), np.cos(x + 2.0 * y)])


def smooth_field_gradient(X: np.ndarray) -> np.ndarray:
    x, y = X[:, 0], X[:, 1]
    g = np.empty((len(x), 2, 2))
    g[:, 0, 0] = np.exp(x) * np.sin(y)
    g[:, 0, 1] = np.exp(x) * np.cos(y)
    g[:, 1, 0] = -np.sin(x + 2.0 * y)
    g[:, 1, 1] = -2.0 * np.sin(x + 2.0 * y)
    return g


def random_quadratic_field(rng: np.random.Generator):
    """A vector field with random quadratic components."""
    coef = rng.normal(size=(2, 6))

    def u(X):
        x, y = X[:, 0], X[:, 1]
        mono = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y])
        return (coef @ mono).T

    return u


def field_error_at_quadrature(space, coeffs: np.ndarray, u, degree: int = 6) -> tuple[float, float]:
    """Max pointwise error of a discrete field and the max field value."""
    vals, _ = space.values_at(coeffs, quadrature_triangle(degree).points)
    X, _ = quadrature_points(space.mesh, degree)
    exact = u(X.reshape(-1, 2)).reshape(vals.shape)
    return float(np.abs(vals - exact).max()), float(np.abs(exact).max())


def interpolation_errors(mesh: Triangulation, u, grad_u, degree: int = 8) -> tuple[float, float]:
    """L2 and broken H1 errors of the canonical interpolant of `u`."""
    space = VelocitySpace(mesh)
    vals, grads = space.values_at(space.interpolate(u), quadrature_triangle(degree).points)
    X, W = quadrature_points(mesh, degree)
    pts = X.reshape(-1, 2)
    eu = u(pts).reshape(vals.shape) - vals
    eg = grad_u(pts).reshape(grads.shape) - grads
    return float(np.sqrt((W * (eu**2).sum(-1)).sum())), float(np.sqrt((W * (eg**2).sum((-1, -2))).sum()))


# ---------------------------------------------------------------------------
# element


def verify_element(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    rng = np.random.default_rng(cfg["seed"])

    with _Stage(rep, "unisolvence"):
        worst = 0.0
        for _ in range(cfg["samples"]):
            D = dof_matrix(triangle_geometry(random_triangle(rng)))
            worst = max(worst, float(np.abs(D - np.eye(12)).max()))
    rep.derived["unisolvence_max_deviation"] = worst
    rep.derived["unisolvence_samples"] = cfg["samples"]
    rep.check("unisolvence: DOF matrix is the identity", worst <= 1e-10, f"max deviation {worst:.3e}")

    with _Stage(rep, "mesh"):
        meshes = mesh_levels(cfg)
    with _Stage(rep, "reproduction"):
        two_level = meshes[1] if len(meshes) > 1 else refine_uniform(meshes[0])
        space = VelocitySpace(two_level)
        rel = 0.0
        for _ in range(20):
            u = random_quadratic_field(rng)
            err, size = field_error_at_quadrature(space, space.interpolate(u), u)
            rel = max(rel, err / size)
    rep.derived["reproduction_relative_error"] = rel
    rep.check("interpolant reproduces quadratic fields", rel <= 1e-11, f"relative error {rel:.3e}")

    with _Stage(rep, "interpolation"):
        rows = []
        for level, mesh in enumerate(meshes):
            l2, h1 = interpolation_errors(mesh, smooth_field, smooth_field_gradient)
            rows.append(dict(check="interpolation", level=level, h=mesh.h, velocity_l2=l2, velocity_h1=h1))
        hs = [r["h"] for r in rows]
        for key in ("velocity_l2", "velocity_h1"):
            rates = convergence_rates(hs, [r[key] for r in rows])
            for r, rate in zip(rows[1:], rates):
                r[f"rate_{key}"] = rate
        l2r = aggregate_rate(hs, [r["velocity_l2"] for r in rows])
        h1r = aggregate_rate(hs, [r["velocity_h1"] for r in rows])
        rep.rows.extend(rows)
    rep.check("interpolation L2 rate in [2.8, 3.2]", l2r is not None and 2.8 <= l2r <= 3.2, f"rate {_fmt(l2r)}")
    rep.check("interpolation H1 rate in [1.8, 2.2]", h1r is not None and 1.8 <= h1r <= 2.2, f"rate {_fmt(h1r)}")

    with _Stage(rep, "conservation"):
        worst, worst_ns = conservation(meshes[: min(3, len(meshes))], rep)
    rep.check("exact conservation of Stokes and Brinkman solves", worst <= 1e-9,
              f"max ||div u||/|u|_1,h {worst:.3e}")
    rep.check("exact conservation at every Navier-Stokes step", worst_ns <= 1e-9,
              f"max ||div u||/|u|_1,h {worst_ns:.3e}")

    with _Stage(rep, "cross-check"):
        ratio, decreasing = cross_check(meshes[1:4] if len(meshes) > 3 else meshes, rep)
    rep.check("npp and taylor-hood converge on a Stokes problem", decreasing)
    rep.check("npp and taylor-hood errors within 10x at the finest level", ratio <= 10.0,
              f"largest L2/H1 ratio {ratio:.3g}")
    return rep


def conservation(meshes, rep: ExperimentReport | None = None) -> tuple[float, float]:
    """Worst ``||div u_h|| / |u_h|_{1,h}`` over Stokes/Brinkman solves and NS steps."""
    worst = 0.0
    for level, mesh in enumerate(meshes):
        for problem, eps in (("stokes", 1.0), ("stokes", 1e-4), ("brinkman", 1.0),
                             ("brinkman", 1e-4), ("brinkman", 0.0)):
            ms = smooth_vortex(eps * eps, sigma=0.0 if problem == "stokes" else 1.0)
            solve = solve_stokes if problem == "stokes" else solve_brinkman
            sol = solve(mesh, eps * eps, ms.f)
            ratio = divergence_norm(sol.vspace, sol.velocity) / broken_h1_seminorm(sol.vspace, sol.velocity)
            worst = max(worst, ratio)
            if rep is not None:
                rep.rows.append(dict(check="conservation", problem=problem, eps=eps, level=level,
                                     h=mesh.h, divergence_over_h1=ratio))
    ratios = []

    def track(t, sol):
        ratios.append(divergence_norm(sol.vspace, sol.velocity) / broken_h1_seminorm(sol.vspace, sol.velocity))

    solve_traveling_wave(meshes[0], 1e-3, TransientConfig(1e-2, 5e-2, "cn-newton"), callback=track)
    worst_ns = max(ratios)
    if rep is not None:
        rep.rows.append(dict(check="conservation", problem="navier-stokes", steps=len(ratios),
                             divergence_over_h1=worst_ns))
    return worst, worst_ns


def cross_check(meshes, rep: ExperimentReport | None = None) -> tuple[float, bool]:
    """Both element pairs on the Stokes vortex.

    Returns the larger of the L2 and broken H1 velocity error ratios at the
    finest level and whether every error decreases under refinement.
    """
    ms = smooth_vortex(1.0)
    errs = {}
    for element in ("npp", "taylor-hood"):
        errs[element] = []
        for level, mesh in enumerate(meshes):
            sol = solve_stokes(mesh, 1.0, ms.f, element=element)
            e = compute_errors(sol.vspace, sol.pspace, sol.velocity, sol.pressure, ms.u, ms.grad_u, ms.p)
            errs[element].append(e)
            if rep is not None:
                rep.rows.append(dict(check="cross-check", element=element, level=level, h=e.h,
                                     velocity_l2=e.l2, velocity_h1=e.h1, pressure_l2=e.pressure))
    ratios = {}
    decreasing = True
    for norm in ("l2", "h1"):
        a, b = (getattr(errs[k][-1], norm) for k in ("npp", "taylor-hood"))
        ratios[norm] = max(a, b) / min(a, b)
        for k in errs:
            seq = [getattr(e, norm) for e in errs[k]]
            decreasing &= all(x > y for x, y in zip(seq, seq[1:]))
    if rep is not None:
        rep.derived["cross_check"] = dict(l2_ratio=ratios["l2"], h1_ratio=ratios["h1"], finest_h=meshes[-1].h)
    return max(ratios.values()), decreasing


# ---------------------------------------------------------------------------
# local kernels


def _patch(m: int, k: int, rng) -> Triangulation:
    """First `k` cells (clockwise) of a random `m`-cell fan."""
    mesh = fan_mesh(m, rng, 0.3)
    macro = extract_macroelement(mesh, 0)
    return mesh.submesh(list(macro.cells[:k]))


def verify_kernels(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    rng = np.random.default_rng(cfg["seed"])

    with _Stage(rep, "dimensions"):
        two = _patch(6, 2, rng)
        cases = [
            ("two-cell", two, (), 0),
            ("two-cell with a free edge", two, (int(two.boundary_edges[0]),), 2),
            ("open three-cell", _patch(6, 3, rng), (), 0),
            ("open four-cell fan", _patch(6, 4, rng), (), 1),
        ]
        for name, patch, free, expected in cases:
            r = kernel_dimension(patch, free, name, str(expected))
            rep.rows.append(dict(check="kernel", patch=name, nullity=r.nullity, expected=expected,
                                 gap=r.gap, stable=r.stable))
            rep.check(f"{name}: nullity {expected}", r.nullity == expected and r.conclusive,
                      f"nullity {r.nullity}, gap {r.gap:.3g}")
        for m in cfg["fans"]:
            ok, gaps = True, []
            for _ in range(cfg["samples"]):
                r = kernel_dimension(fan_mesh(m, rng, 0.3), (), f"{m}-macroelement")
                gaps.append(r.gap)
                ok &= r.nullity <= m + 1 and r.nullity_normal_free == m and r.gap >= 1e3 and r.stable
                rep.rows.append(dict(check="kernel", patch=f"{m}-macroelement", nullity=r.nullity,
                                     nullity_normal_free=r.nullity_normal_free, gap=r.gap, stable=r.stable))
            rep.check(f"{m}-macroelement: nullity <= {m + 1}, with zero normal means {m}", ok,
                      f"smallest gap {min(gaps):.3g}")

    with _Stage(rep, "atoms"):
        fans = [certify_atom(_patch(int(rng.integers(5, 9)), 4, rng)) for _ in range(20)]
        triples = [certify_atom(fan_mesh(3, rng, 0.3)) for _ in range(5)]
    rep.derived["atom_samples"] = {"fans": len(fans), "triples": len(triples)}
    for name, results in (("four-cell fan", fans), ("closed triple", triples)):
        div = max(r["divergence"] for r in results)
        support = max(r["outside_support"] for r in results)
        member = max(r["null_space_distance"] for r in results)
        rep.derived[f"atom_{name.replace(' ', '_')}"] = dict(divergence=div, outside_support=support,
                                                            null_space_distance=member)
        rep.check(f"{name} atoms are divergence-free", div <= 1e-11, f"max {div:.3e}")
        rep.check(f"{name} atoms are conforming and patch-supported",
                  all(r["conforming"] for r in results) and support == 0.0)
        rep.check(f"{name} atoms lie in the numeric null space", member <= 1e-9, f"max {member:.3e}")
    span = max(r["span_residual"] for r in fans)
    rep.check("four-cell fan atoms span the numeric null space", span <= 1e-9, f"max {span:.3e}")
    span = max(r["span_residual"] for r in triples)
    rep.check("closed triple atoms span the null space with zero normal means", span <= 1e-9,
              f"max {span:.3e}")
    return rep


def _null_basis(B: np.ndarray) -> np.ndarray:
    nullity, _, _, _ = numerical_nullity(B)
    _, _, vt = np.linalg.svd(B)
    return vt[B.shape[1] - nullity :].T


def _span_residual(basis: np.ndarray, vectors: np.ndarray) -> float:
    """Largest distance of a unit `basis` column from the span of `vectors` columns."""
    if basis.shape[1] == 0:
        return np.inf
    q, _ = np.linalg.qr(vectors)
    return float(np.linalg.norm(basis - q @ (q.T @ basis), axis=0).max())


def certify_atom(patch: Triangulation) -> dict:
    """Divergence, conformity, support and null-space relations of atoms on `patch`.

    `patch` is an open four-cell fan (one atom; it must span the null space)
    or a closed triple (its three cyclic atoms must span the null space with
    zero normal means on the interior edges).
    """
    B, cols, space = patch_divergence_matrix(patch)
    cells = list(range(patch.num_cells))
    chains = [cells] if len(cells) == 4 else [cells[s:] + cells[:s] for s in range(3)]
    try:
        atoms = np.array([atom_function(space.mesh, chain, space) for chain in chains])
    except ValueError:
        return dict(divergence=np.inf, conforming=False, outside_support=np.inf,
                    null_space_distance=np.inf, span_residual=np.inf)
    div, member = 0.0, 0.0
    null = _null_basis(B)
    for v in atoms:
        _, grad = space.values_at(v, quadrature_triangle(6).points)
        div = max(div, float(np.abs(grad[..., 0, 0] + grad[..., 1, 1]).max() / np.abs(v).max()))
        x = v[cols] / np.linalg.norm(v[cols])
        member = max(member, float(np.linalg.norm(x - null @ (null.T @ x))))
    outside = float(np.abs(atoms[:, space.constrained]).max()) if space.constrained.any() else 0.0
    if len(cells) == 4:
        span = _span_residual(null, atoms[:, cols].T)
    else:
        Bn, cols_n, _ = patch_divergence_matrix(patch, (), patch.interior_edges)
        kept = np.isin(cols, cols_n)
        dropped = float(np.abs(atoms[:, cols[~kept]]).max())
        span = max(_span_residual(_null_basis(Bn), atoms[:, cols_n].T), dropped)
    return dict(divergence=div, conforming=True, outside_support=outside,
                null_space_distance=member, span_residual=span)


# ---------------------------------------------------------------------------
# stability


def verify_stability(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    with _Stage(rep, "mesh"):
        meshes = mesh_levels(cfg)
    violations = [len(check_assumption_a(m)) for m in meshes]
    rep.derived["assumption_a_violations"] = violations
    betas, korns = [], []
    for level, mesh in enumerate(meshes):
        with _Stage(rep, "inf-sup"):
            vspace, pspace = make_spaces(mesh, "npp")
            r = estimate_inf_sup(vspace, pspace)
        betas.append(r.value)
        with _Stage(rep, "korn"):
            k = estimate_korn(VelocitySpace(mesh, [cfg["korn.boundary"]]))
        korns.append(k.value)
        rep.rows.append(dict(level=level, h=mesh.h, velocity_dofs=r.velocity_dofs,
                             pressure_dofs=r.pressure_dofs, inf_sup=r.value, korn=k.value,
                             assumption_a_violations=violations[level]))
    with _Stage(rep, "constants"):
        vspace, pspace = make_spaces(meshes[0], "npp", mean_zero=False)
        full = estimate_inf_sup(vspace, pspace, mean_zero=False)
    zero = abs(full.info["smallest_eigenvalue"])
    rep.derived["constant_pressure_eigenvalue"] = zero
    rep.check("mesh satisfies Assumption A", not any(violations), f"violations {violations}")
    drop = (betas[-2] - betas[-1]) / betas[-2] if len(betas) > 1 else 0.0
    rep.check("inf-sup constant positive", min(betas) > 0, ", ".join(f"{b:.4f}" for b in betas))
    rep.check("inf-sup relative drop below 10% on the last two levels", drop < 0.10, f"drop {drop:.3%}")
    rep.check("constant pressures give a zero eigenvalue", zero <= 1e-12, f"eigenvalue {zero:.3e}")
    kdrop = (korns[0] - min(korns)) / korns[0]
    rep.check("Korn constant positive", min(korns) > 0, ", ".join(f"{k:.4f}" for k in korns))
    rep.check("Korn constant degrades less than 20%", kdrop < 0.20, f"degradation {kdrop:.3%}")
    return rep


__all__ = [
    "verify_element",
    "verify_kernels",
    "verify_stability",
    "conservation",
    "cross_check",
    "certify_atom",
    "random_triangle",
]
