"""Pure numpy element-matrix kernels (fallback for the compiled module).

All kernels take the per-cell monomial coefficient tensor ``C`` of shape
``(nc, nb, 6, 2)``, barycentric gradients ``gl`` ``(nc, 3, 2)``, cell areas,
quadrature points ``bary`` ``(nq, 3)`` and reference weights ``w`` (summing
to 1/2) and return unsigned local matrices of shape ``(nc, nb, nb)``.
"""

from __future__ import annotations

import numpy as np

from .element import monomial_gradients, monomials


def _tabulate(C, gl, bary):
    vals = np.einsum("cbmi,qm->cqbi", C, monomials(bary))
    grads = np.einsum("cbmi,cqmj->cqbij", C, monomial_gradients(bary, gl))
    return vals, grads


def gradgrad_local(C, gl, area, bary, w):
    _, grads = _tabulate(C, gl, bary)
    return np.einsum("q,c,cqaij,cqbij->cab", w, 2.0 * area, grads, grads, optimize=True)


def mass_local(C, gl, area, bary, w):
    vals = np.einsum("cbmi,qm->cqbi", C, monomials(bary))
    return np.einsum("q,c,cqai,cqbi->cab", w, 2.0 * area, vals, vals, optimize=True)


def convection_local(C, gl, area, bary, w, wloc):
    """``N[a, b] = int (w . grad phi_b) . phi_a`` with ``w = sum wloc_c phi_c``."""
    vals, grads = _tabulate(C, gl, bary)
    wq = np.einsum("cqbi,cb->cqi", vals, wloc)
    return np.einsum(
        "q,c,cqj,cqbij,cqai->cab", w, 2.0 * area, wq, grads, vals, optimize=True
    )


def convection_derivative_local(C, gl, area, bary, w, uloc):
    """``N'[a, b] = int (phi_b . grad u) . phi_a``."""
    vals, grads = _tabulate(C, gl, bary)
    gu = np.einsum("cqbij,cb->cqij", grads, uloc)
    return np.einsum(
        "q,c,cqbj,cqij,cqai->cab", w, 2.0 * area, vals, gu, vals, optimize=True
    )
