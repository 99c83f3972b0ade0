"""Element-matrix kernels, compiled when available.

The compiled module ``consfem._ckernels`` is used unless it failed to build
or the environment variable ``CONSFEM_PURE_PYTHON`` is set to a non-empty
value other than ``0``; otherwise the numpy implementation in
``consfem._pykernels`` is used.  :data:`BACKEND` names the active one.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_force_python = os.environ.get("CONSFEM_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_python:
        raise ImportError("pure python requested")
    from . import _ckernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

BACKENDS = {"python": _pykernels}
if BACKEND == "compiled":
    BACKENDS["compiled"] = _impl


def _prepare(C, gl, area, bary, w):
    return (
        np.ascontiguousarray(C, dtype=float),
        np.ascontiguousarray(gl, dtype=float),
        np.ascontiguousarray(area, dtype=float),
        np.ascontiguousarray(np.atleast_2d(bary), dtype=float),
        np.ascontiguousarray(w, dtype=float),
    )


def gradgrad_local(C, gl, area, bary, w, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.gradgrad_local(*_prepare(C, gl, area, bary, w))


def mass_local(C, gl, area, bary, w, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.mass_local(*_prepare(C, gl, area, bary, w))


def convection_local(C, gl, area, bary, w, wloc, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.convection_local(
        *_prepare(C, gl, area, bary, w), np.ascontiguousarray(wloc, dtype=float)
    )


def convection_derivative_local(C, gl, area, bary, w, uloc, backend=None):
    impl = BACKENDS[backend] if backend else _impl
    return impl.convection_derivative_local(
        *_prepare(C, gl, area, bary, w), np.ascontiguousarray(uloc, dtype=float)
    )
