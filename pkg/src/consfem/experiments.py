"""Experiment pipelines: mesh -> spaces -> assemble -> solve -> analyse.

Every pipeline takes an :class:`~consfem.config.ExperimentConfig` and
returns an :class:`ExperimentReport` whose ``checks`` decide the exit code
of the command line runner.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .analysis import aggregate_rate, compute_errors, convergence_rates, l2_norm, max_divergence
from .assembly import build_system
from .cavity import cavity_diagnostics
from .config import ExperimentConfig
from .fileio import export_solution
from .manufactured import boundary_layer, no_flow, smooth_vortex, traveling_wave
from .mesh import (
    Triangulation,
    check_assumption_a,
    forward_step_mesh,
    perturbed_mesh,
    read_mesh,
    refine_uniform,
    structured_square_mesh,
)
from .solver import (
    TransientConfig,
    add_coriolis,
    lift,
    make_spaces,
    solve_brinkman,
    solve_navier_stokes,
    solve_saddle,
    solve_stokes,
    time_dependent,
)

# values of the discrete driven-cavity flow reported for the new element on
# the 43 x 43 x 2 mesh (streamfunction and vorticity at the vortex centres)
CAVITY_REFERENCE = {
    "primary_psi": 1.1733e-01,
    "primary_xy": (0.4688, 0.5703),
    "primary_vorticity": 2.0615e00,
    "secondary_psi": -1.6221e-03,
    "secondary_xy": (0.1406, 0.1094),
    "secondary_vorticity": -9.8718e-01,
}


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "version": __version__,
            "config": self.config,
            "rows": self.rows,
            "derived": self.derived,
            "checks": [c.as_dict() for c in self.checks],
            "passed": self.passed,
            "timings": self.timings,
            "artifacts": self.artifacts,
        }


class StageError(RuntimeError):
    """An experiment stage failed; the message names the stage."""


class _Stage:
    def __init__(self, report: ExperimentReport, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.report.timings[self.name] = self.report.timings.get(self.name, 0.0) + (
            time.perf_counter() - self.t0
        )
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(f"stage '{self.name}' failed: {type(exc).__name__}: {exc}") from exc
        return False


# ---------------------------------------------------------------------------
# meshes


def base_mesh(cfg: ExperimentConfig) -> Triangulation:
    gen = cfg["mesh.generator"]
    n = cfg["mesh.n"]
    if gen == "file":
        mesh = read_mesh(cfg["mesh.file"])
    elif gen == "crisscross":
        mesh = structured_square_mesh(n, "crisscross")
    elif gen == "structured":
        mesh = structured_square_mesh(n, cfg["mesh.diagonal"])
    else:
        mesh = forward_step_mesh(n, cfg["mesh.diagonal"])
    if cfg["mesh.perturb"] > 0:
        mesh = perturbed_mesh(mesh, cfg["mesh.perturb"], cfg["mesh.seed"])
    return mesh


def mesh_levels(cfg: ExperimentConfig, levels: int | None = None) -> list[Triangulation]:
    meshes = [base_mesh(cfg)]
    for _ in range((levels or cfg["levels"]) - 1):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def _error_row(base: dict, rep) -> dict:
    row = dict(base)
    row.update(
        h=rep.h, dofs=rep.dofs, velocity_l2=rep.l2, velocity_h1=rep.h1, divergence=rep.div,
        pressure_l2=rep.pressure, energy=rep.energy,
    )
    return row


def _add_rates(rows: list[dict], keys: tuple[str, ...]) -> dict:
    """Per-pair rates into the rows and aggregate rates returned by key."""
    hs = [r["h"] for r in rows]
    agg = {}
    for key in keys:
        errs = [r[key] for r in rows]
        rates = convergence_rates(hs, errs) if len(rows) > 1 else []
        rows[0][f"rate_{key}"] = None
        for r, rate in zip(rows[1:], rates):
            r[f"rate_{key}"] = rate
        agg[key] = aggregate_rate(hs, errs)
    return agg


def _in(value, lo, hi) -> bool:
    return value is not None and lo <= value <= hi


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.3g}"


# ---------------------------------------------------------------------------
# Example 1: no flow, large pressure


def run_ex1(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    with _Stage(rep, "mesh"):
        meshes = mesh_levels(cfg)
    for element in cfg["element"]:
        for ra in cfg["ra"]:
            ms = no_flow(ra)
            for level, mesh in enumerate(meshes):
                with _Stage(rep, "solve"):
                    sol = solve_stokes(mesh, 1.0, ms.f, element=element)
                with _Stage(rep, "analyse"):
                    err = compute_errors(sol.vspace, sol.pspace, sol.velocity, sol.pressure,
                                         ms.u, ms.grad_u, ms.p)
                rep.rows.append(_error_row(dict(element=element, ra=ra, level=level), err))
    finest = len(meshes) - 1
    by = {(r["element"], r["ra"]): r["velocity_l2"] for r in rep.rows if r["level"] == finest}
    if "npp" in cfg["element"]:
        npp = [by[("npp", ra)] for ra in cfg["ra"]]
        rep.derived["npp_velocity_norms"] = npp
        spread = max(npp) / max(min(npp), 1e-300)
        rep.check("npp velocity at most 1e-6", max(npp) <= 1e-6, f"max {max(npp):.3e}")
        rep.check("npp velocity flat in Ra (spread < 2)", spread < 2.0, f"max/min {spread:.3g}")
        if "taylor-hood" in cfg["element"]:
            ra = max(cfg["ra"])
            ratio = by[("taylor-hood", ra)] / max(by[("npp", ra)], 1e-300)
            rep.derived["taylor_hood_over_npp"] = ratio
            rep.check("taylor-hood error exceeds npp by 1e3 at the largest Ra", ratio >= 1e3,
                      f"ratio {ratio:.3e}")
    return rep


# ---------------------------------------------------------------------------
# Example 2: Coriolis forces on a forward-facing step


def step_inflow(X: np.ndarray) -> np.ndarray:
    y = X[:, 1]
    return np.column_stack([y * (2.0 - y), np.zeros(len(X))])


def step_outflow(X: np.ndarray) -> np.ndarray:
    y = X[:, 1]
    return np.column_stack([8.0 * (y - 1.0) * (2.0 - y), np.zeros(len(X))])


def _zero(X: np.ndarray) -> np.ndarray:
    return np.zeros((len(X), 2))


def solve_coriolis(mesh, eps2: float, omega: float, element: str, bc=None):
    vspace, pspace = make_spaces(mesh, element)
    system = add_coriolis(build_system("stokes", eps2, vspace, pspace), omega)
    return solve_saddle(system, lift(vspace, bc))


def run_ex2(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    with _Stage(rep, "mesh"):
        meshes = mesh_levels(cfg)
    bc = {"inflow": step_inflow, "outflow": step_outflow, "wall": _zero}
    eps2 = cfg["eps2"]
    changes = {}
    for element in cfg["element"]:
        for level, mesh in enumerate(meshes):
            with _Stage(rep, "solve"):
                ref = solve_coriolis(mesh, eps2, 0.0, element, bc)
            norm0 = l2_norm(ref.vspace, ref.velocity)
            for omega in cfg["omega"]:
                with _Stage(rep, "solve"):
                    sol = solve_coriolis(mesh, eps2, omega, element, bc)
                with _Stage(rep, "analyse"):
                    dv = l2_norm(sol.vspace, sol.velocity - ref.velocity)
                    row = dict(
                        element=element, omega=omega, level=level, h=mesh.h,
                        dofs=sol.vspace.dim + sol.pspace.dim,
                        velocity_l2=l2_norm(sol.vspace, sol.velocity),
                        change_from_no_rotation=dv / norm0,
                        max_divergence=max_divergence(sol.vspace, sol.velocity),
                        relative_residual=sol.info["relative_residual"],
                    )
                rep.rows.append(row)
                changes[(element, omega, level)] = dv / norm0
                if cfg["output.vtk"] and level == len(meshes) - 1:
                    rep.artifacts.append(_vtk(cfg, f"{element}_omega{omega:g}", sol))
    if "npp" in cfg["element"]:
        worst = max(v for (e, _, _), v in changes.items() if e == "npp")
        rep.check("npp velocity independent of the rotation rate", worst <= 1e-8,
                  f"max relative change {worst:.3e}")
    if {"npp", "taylor-hood"} <= set(cfg["element"]):
        om, lv = max(cfg["omega"]), len(meshes) - 1
        th, npp = changes[("taylor-hood", om, lv)], changes[("npp", om, lv)]
        rep.derived["taylor_hood_change"] = th
        rep.check("taylor-hood velocity changes more than npp", th > npp,
                  f"taylor-hood {th:.3e}, npp {npp:.3e}")
    return rep


# ---------------------------------------------------------------------------
# Examples 3 and 4: Brinkman problems


def _brinkman_sweep(rep, cfg, meshes, eps_list, make, bc_from_exact: bool, elements):
    agg = {}
    for element in elements:
        for eps in eps_list:
            if element == "taylor-hood" and eps == 0:
                continue  # the continuous pair is not a Darcy discretisation
            ms = make(eps)
            rows = []
            for level, mesh in enumerate(meshes):
                bc = ms.u if bc_from_exact else None
                with _Stage(rep, "solve"):
                    sol = solve_brinkman(mesh, eps * eps, ms.f, bc=bc, element=element)
                with _Stage(rep, "analyse"):
                    err = compute_errors(sol.vspace, sol.pspace, sol.velocity, sol.pressure,
                                         ms.u, ms.grad_u, ms.p, eps2=eps * eps)
                rows.append(_error_row(dict(element=element, eps=eps, level=level), err))
            agg[(element, eps)] = _add_rates(rows, ("velocity_l2", "velocity_h1", "energy", "pressure_l2"))
            rep.rows.extend(rows)
    rep.derived["aggregate_rates"] = [
        dict(element=e, eps=eps, **{f"rate_{k}": v for k, v in r.items()}) for (e, eps), r in agg.items()
    ]
    return agg


def run_ex3(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    with _Stage(rep, "mesh"):
        meshes = mesh_levels(cfg)
    agg = _brinkman_sweep(rep, cfg, meshes, cfg["eps"], lambda e: smooth_vortex(e * e, sigma=1.0),
                          False, cfg["element"])
    bands = {2.0**-8: ((1.8, 2.2), (0.8, 1.3)), 0.0: ((2.7, 3.3), (1.7, 2.3))}
    for eps, (l2b, h1b) in bands.items():
        r = agg.get(("npp", eps))
        if r is None:
            continue
        rep.check(f"eps={eps:g}: L2 rate in [{l2b[0]}, {l2b[1]}]", _in(r["velocity_l2"], *l2b),
                  f"rate {_fmt(r['velocity_l2'])}")
        rep.check(f"eps={eps:g}: H1 rate in [{h1b[0]}, {h1b[1]}]", _in(r["velocity_h1"], *h1b),
                  f"rate {_fmt(r['velocity_h1'])}")
    return rep


def run_ex4(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    with _Stage(rep, "mesh"):
        meshes = mesh_levels(cfg)
    agg = _brinkman_sweep(rep, cfg, meshes, cfg["eps"], boundary_layer, True, cfg["element"])
    if "npp" in cfg["element"]:
        eps_max = max(cfg["eps"])
        for eps in cfg["eps"]:
            r = agg[("npp", eps)]
            floor = 1.0 if eps == eps_max else 0.45
            rep.check(f"eps={eps:g}: energy rate >= {floor}", _in(r["energy"], floor, math.inf),
                      f"rate {_fmt(r['energy'])}")
            rep.check(f"eps={eps:g}: pressure rate >= 0.9", _in(r["pressure_l2"], 0.9, math.inf),
                      f"rate {_fmt(r['pressure_l2'])}")
    return rep


# ---------------------------------------------------------------------------
# Navier--Stokes


def _transient(cfg) -> TransientConfig:
    return TransientConfig(
        dt=cfg["dt"], t_final=cfg["t_final"], scheme=cfg["scheme"], tol=cfg["nonlinear.tol"],
        max_iter=cfg["nonlinear.max_iter"], steady_tol=cfg.get("steady_tol"),
    )


def solve_traveling_wave(mesh, eps2: float, config: TransientConfig, element: str = "npp",
                         keep: str = "final", callback=None):
    ms = traveling_wave(eps2)
    f = time_dependent(lambda t: ms.at(t).f)
    bc = time_dependent(lambda t: ms.at(t).u)
    return ms, solve_navier_stokes(mesh, eps2, f, bc, config, u0=ms.at(0.0).u, element=element,
                                   keep=keep, callback=callback)


def run_ex5(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    with _Stage(rep, "mesh"):
        meshes = mesh_levels(cfg)
    config = _transient(cfg)
    errs = {}
    for element in cfg["element"]:
        rows = []
        for level, mesh in enumerate(meshes):
            divs = []

            def track(t, sol):
                divs.append(max_divergence(sol.vspace, sol.velocity))

            with _Stage(rep, "solve"):
                ms, traj = solve_traveling_wave(mesh, cfg["eps2"], config, element, callback=track)
            final = traj.final
            exact = ms.at(traj.times[-1])
            with _Stage(rep, "analyse"):
                err = compute_errors(final.vspace, final.pspace, final.velocity, final.pressure,
                                     exact.u, exact.grad_u, exact.p)
            row = _error_row(dict(element=element, level=level), err)
            row["max_divergence_over_steps"] = max(divs) if divs else 0.0
            row["nonlinear_iterations"] = int(sum(traj.info["nonlinear_iterations"]))
            rows.append(row)
        _add_rates(rows, ("velocity_l2",))
        errs[element] = rows
        rep.rows.extend(rows)
    if "npp" in errs:
        rates = [r["rate_velocity_l2"] for r in errs["npp"][1:]]
        l2 = [r["velocity_l2"] for r in errs["npp"]]
        rep.check("npp L2 rates in [1.8, 3.2] on every level pair",
                  all(_in(r, 1.8, 3.2) for r in rates), ", ".join(_fmt(r) for r in rates))
        rep.check("npp errors decrease monotonically", all(a > b for a, b in zip(l2, l2[1:])))
        divs = [r["max_divergence_over_steps"] for r in errs["npp"]]
        rep.check("npp divergence-free at every step", max(divs) <= 1e-9, f"max {max(divs):.3e}")
    if "taylor-hood" in errs and len(errs["taylor-hood"]) > 1:
        last = errs["taylor-hood"][-1]["rate_velocity_l2"]
        rep.check("taylor-hood L2 rate on the finest pair in [1.3, 1.8]", _in(last, 1.3, 1.8),
                  f"rate {_fmt(last)}")
    return rep


def cavity_lid(X: np.ndarray) -> np.ndarray:
    return np.tile([-1.0, 0.0], (len(X), 1))


def solve_cavity(mesh, eps2: float, config: TransientConfig, element: str = "npp", callback=None):
    """Driven cavity: ``u = (-1, 0)`` on the edges tagged ``top``, zero elsewhere."""
    bc = {tag: (cavity_lid if tag == "top" else _zero) for tag in sorted(mesh.tag_names)}
    return solve_navier_stokes(mesh, eps2, None, bc, config, element=element, callback=callback)


def run_ex6(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport(cfg.experiment, cfg.echo())
    with _Stage(rep, "mesh"):
        mesh = mesh_levels(cfg)[-1]
    rep.derived["assumption_a_violations"] = len(check_assumption_a(mesh))
    config = _transient(cfg)
    spacing = 1.0 / (cfg["lattice"] - 1)
    for element in cfg["element"]:
        divs = []
        with _Stage(rep, "solve"):
            traj = solve_cavity(mesh, cfg["eps2"], config, element,
                                callback=lambda t, s: divs.append(max_divergence(s.vspace, s.velocity)))
        sol = traj.final
        with _Stage(rep, "analyse"):
            diag = cavity_diagnostics(sol.vspace, sol.velocity, sol.pressure, cfg["lattice"],
                                      traj.info.get("last_time_derivative"))
        info = traj.info
        rep.derived[element] = dict(
            diag.as_dict(), steps=info["steps"], final_time=info["final_time"],
            steady_reached=info["steady_reached"], time_derivative=info.get("last_time_derivative"),
            nonlinear_iterations=int(sum(info["nonlinear_iterations"])),
            max_divergence_over_steps=max(divs) if divs else 0.0,
        )
        for name, v in (("primary", diag.primary), ("secondary", diag.secondary)):
            rep.rows.append(dict(element=element, vortex=name, psi=v.value, x=v.x, y=v.y,
                                 vorticity=v.vorticity))
        if cfg["output.vtk"]:
            rep.artifacts.append(_vtk(cfg, f"cavity_{element}", sol))
        if element == "npp":
            ref = CAVITY_REFERENCE
            p, s = diag.primary, diag.secondary
            rel = abs(p.value - ref["primary_psi"]) / ref["primary_psi"]
            rep.check("primary streamfunction within 5%", rel <= 0.05,
                      f"{p.value:.5e} vs {ref['primary_psi']:.5e}")
            dx = max(abs(p.x - ref["primary_xy"][0]), abs(p.y - ref["primary_xy"][1]))
            rep.check("primary vortex within one lattice cell", dx <= spacing * (1 + 1e-9),
                      f"({p.x:.4f}, {p.y:.4f})")
            relw = abs(p.vorticity - ref["primary_vorticity"]) / ref["primary_vorticity"]
            rep.check("primary vorticity within 5%", relw <= 0.05,
                      f"{p.vorticity:.5e} vs {ref['primary_vorticity']:.5e}")
            rels = abs(s.value - ref["secondary_psi"]) / abs(ref["secondary_psi"])
            rep.check("secondary streamfunction within 15%", rels <= 0.15,
                      f"{s.value:.5e} vs {ref['secondary_psi']:.5e}")
            rep.check("steady state reached", info["steady_reached"],
                      f"time derivative {info.get('last_time_derivative', float('nan')):.3e}")
    return rep


def _vtk(cfg, name: str, sol) -> str:
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.vtk"
    export_solution(path, sol.vspace, sol.velocity, sol.pspace, sol.pressure, title=name)
    return str(path)


def _verify(kind: str) -> Callable[[ExperimentConfig], ExperimentReport]:
    def run(cfg: ExperimentConfig) -> ExperimentReport:
        from . import verification

        return getattr(verification, f"verify_{kind}")(cfg)

    return run


PIPELINES: dict[str, Callable[[ExperimentConfig], ExperimentReport]] = {
    "ex1-noflow": run_ex1,
    "ex2-coriolis": run_ex2,
    "ex3-brinkman-smooth": run_ex3,
    "ex4-brinkman-layer": run_ex4,
    "ex5-ns-manufactured": run_ex5,
    "ex6-cavity": run_ex6,
    "verify-element": _verify("element"),
    "verify-kernels": _verify("kernels"),
    "verify-stability": _verify("stability"),
}


def run(cfg: ExperimentConfig) -> ExperimentReport:
    t0 = time.perf_counter()
    rep = PIPELINES[cfg.experiment](cfg)
    rep.timings["total"] = time.perf_counter() - t0
    return rep
