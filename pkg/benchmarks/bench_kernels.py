"""Compare the compiled and pure-python element kernels.

Usage::

    python benchmarks/bench_kernels.py [--sizes 8 16 32] [--repeat 5] [--json out.json]

For every mesh size and kernel the best-of-``repeat`` wall time of both
backends is reported together with the speed-up and the largest relative
difference between their outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from consfem import kernels
from consfem.assembly import CONVECTION_DEGREE
from consfem.mesh import crisscross_mesh
from consfem.quadrature import quadrature_triangle
from consfem.space import VelocitySpace

KERNELS = {
    "gradgrad": (kernels.gradgrad_local, 2, False),
    "mass": (kernels.mass_local, 4, False),
    "convection": (kernels.convection_local, CONVECTION_DEGREE, True),
    "convection_derivative": (kernels.convection_derivative_local, CONVECTION_DEGREE, True),
}


def bench(n: int, repeat: int, seed: int = 0) -> list[dict]:
    space = VelocitySpace(crisscross_mesh(n))
    g = space.mesh.geometry
    wloc = space.gather(np.random.default_rng(seed).normal(size=space.dim))
    rows = []
    for name, (fn, degree, needs_field) in KERNELS.items():
        rule = quadrature_triangle(degree)
        args = (space.coefficients, g.grad_lambda, g.area, rule.points, rule.weights)
        args += (wloc,) if needs_field else ()
        row = {"cells": space.mesh.num_cells, "kernel": name}
        out = {}
        for backend in kernels.BACKENDS:
            out[backend] = fn(*args, backend=backend)
            row[backend] = min(timeit.repeat(lambda: fn(*args, backend=backend), number=1, repeat=repeat))
        if "compiled" in out:
            ref = out["python"]
            row["speedup"] = row["python"] / row["compiled"]
            row["max_rel_diff"] = float(np.abs(out["compiled"] - ref).max() / np.abs(ref).max())
        rows.append(row)
    return rows


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", help="also write the results to this file")
    args = parser.parse_args(argv)

    print(f"active backend: {kernels.BACKEND}; available: {', '.join(kernels.BACKENDS)}")
    rows = [r for n in args.sizes for r in bench(n, args.repeat)]
    header = f"{'cells':>7} {'kernel':<22} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'rel diff':>9}"
    print(header)
    for r in rows:
        compiled = f"{r['compiled']:13.4f}" if "compiled" in r else f"{'-':>13}"
        speedup = f"{r['speedup']:8.1f}" if "speedup" in r else f"{'-':>8}"
        diff = f"{r['max_rel_diff']:9.1e}" if "max_rel_diff" in r else f"{'-':>9}"
        print(f"{r['cells']:7d} {r['kernel']:<22} {r['python']:11.4f} {compiled} {speedup} {diff}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
