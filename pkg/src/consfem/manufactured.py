"""Exact solutions and their data, derived symbolically.

A :class:`Manufactured` object turns sympy expressions for the velocity and
the pressure into vectorised callables ``X (n, 2) -> values`` together with
the body force of the chosen model

    dt u - eps2 lap u + sigma u + (u . grad) u + 2 omega u_perp + grad p = f.

Time-dependent solutions use the symbol ``t``; their callables take ``t`` as
a keyword and :meth:`Manufactured.at` freezes a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sy

x, y, t = sy.symbols("x y t", real=True)


def _vectorise(exprs, shape: tuple[int, ...]) -> Callable:
    flat = list(exprs)
    fn = sy.lambdify((x, y, t), flat, modules="numpy")

    def evaluate(X: np.ndarray, time: float = 0.0) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        pts = X.reshape(-1, 2)
        vals = fn(pts[:, 0], pts[:, 1], time)
        out = np.stack([np.broadcast_to(np.asarray(v, dtype=float), pts.shape[:1]) for v in vals], axis=-1)
        return out.reshape(X.shape[:-1] + shape)

    return evaluate


@dataclass
class Manufactured:
    """Exact velocity ``u``, gradient, pressure and matching right-hand sides."""

    u_expr: tuple
    p_expr: object
    f_expr: tuple
    g_expr: object
    params: dict

    def __post_init__(self):
        grad = [sy.diff(c, v) for c in self.u_expr for v in (x, y)]
        self._u = _vectorise(self.u_expr, (2,))
        self._grad = _vectorise(grad, (2, 2))
        self._p = _vectorise([self.p_expr], ())
        self._f = _vectorise(self.f_expr, (2,))
        self._g = _vectorise([self.g_expr], ())

    @property
    def transient(self) -> bool:
        exprs = (*self.u_expr, self.p_expr)
        return any(sy.sympify(e).has(t) for e in exprs)

    def u(self, X, t: float = 0.0) -> np.ndarray:
        return self._u(X, t)

    def grad_u(self, X, t: float = 0.0) -> np.ndarray:
        return self._grad(X, t)

    def p(self, X, t: float = 0.0) -> np.ndarray:
        return self._p(X, t)

    def f(self, X, t: float = 0.0) -> np.ndarray:
        return self._f(X, t)

    def g(self, X, t: float = 0.0) -> np.ndarray:
        return self._g(X, t)

    def at(self, time: float) -> "FrozenSolution":
        return FrozenSolution(self, float(time))


@dataclass(frozen=True)
class FrozenSolution:
    """The fields of a :class:`Manufactured` solution at a fixed time."""

    parent: Manufactured
    time: float

    def u(self, X):
        return self.parent.u(X, self.time)

    def grad_u(self, X):
        return self.parent.grad_u(X, self.time)

    def p(self, X):
        return self.parent.p(X, self.time)

    def f(self, X):
        return self.parent.f(X, self.time)

    def g(self, X):
        return self.parent.g(X, self.time)


def manufacture(
    u_expr,
    p_expr,
    eps2: float = 1.0,
    sigma: float = 0.0,
    convection: bool = False,
    time_derivative: bool = False,
    omega: float = 0.0,
) -> Manufactured:
    """Body force and divergence of the model applied to ``(u, p)``."""
    u1, u2 = (sy.sympify(e) for e in u_expr)
    p = sy.sympify(p_expr)
    e2 = sy.nsimplify(eps2)
    comps = []
    for c, dp, perp in ((u1, sy.diff(p, x), -u2), (u2, sy.diff(p, y), u1)):
        f = -e2 * (sy.diff(c, x, 2) + sy.diff(c, y, 2)) + dp
        if sigma:
            f += sy.nsimplify(sigma) * c
        if convection:
            f += u1 * sy.diff(c, x) + u2 * sy.diff(c, y)
        if time_derivative:
            f += sy.diff(c, t)
        if omega:
            f += 2 * sy.nsimplify(omega) * perp
        # no simplification: it may merge exponentials into overflowing products
        comps.append(f)
    g = sy.diff(u1, x) + sy.diff(u2, y)
    params = dict(eps2=eps2, sigma=sigma, convection=convection, time_derivative=time_derivative, omega=omega)
    return Manufactured((u1, u2), p, tuple(comps), g, params)


# ---------------------------------------------------------------------------
# the solutions used by the experiments


def _curl(psi):
    return (sy.diff(psi, y), -sy.diff(psi, x))


def smooth_vortex(eps2: float = 1.0, sigma: float = 0.0) -> Manufactured:
    """``u = curl(sin^2(pi x) sin^2(pi y))``, ``p = 2/pi - sin(pi x)``."""
    psi = sy.sin(sy.pi * x) ** 2 * sy.sin(sy.pi * y) ** 2
    return manufacture(_curl(psi), 2 / sy.pi - sy.sin(sy.pi * x), eps2, sigma)


def boundary_layer(eps: float) -> Manufactured:
    """Brinkman solution with layers of width ``eps`` along ``x = 0`` and ``y = 0``."""
    e = sy.nsimplify(eps)
    u = (-x * sy.exp(-x * y / e), y * sy.exp(-x * y / e))
    return manufacture(u, -e * sy.exp(-x / e), eps * eps, sigma=1.0)


def traveling_wave(eps2: float) -> Manufactured:
    """Navier--Stokes solution ``u = (sin(1-x) sin(y+t), -cos(1-x) cos(y+t))``."""
    u = (sy.sin(1 - x) * sy.sin(y + t), -sy.cos(1 - x) * sy.cos(y + t))
    p = -sy.cos(1 - x) * sy.sin(y + t)
    return manufacture(u, p, eps2, convection=True, time_derivative=True)


def no_flow(ra: float) -> Manufactured:
    """Zero velocity balanced by the pressure ``Ra (y^3 - y^2/2 + y - 7/12)``."""
    r = sy.nsimplify(ra)
    return manufacture((sy.Integer(0), sy.Integer(0)), r * (y**3 - y**2 / 2 + y - sy.Rational(7, 12)))
