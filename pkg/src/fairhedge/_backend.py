"""Kernel dispatch: compiled extension when importable, numpy otherwise.

``fold(values, weights, offsets)`` sums ``weights[i] * values[i]`` over each
segment ``offsets[j]:offsets[j+1]`` in stored order. ``chol_solve(mats, rhs)``
solves a stack of small symmetric positive-definite systems and returns the
solutions with a per-system success mask.
"""
import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = _BACKENDS.get("compiled", _kernels_py)


def available():
    return sorted(_BACKENDS)


def current():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use(name):
    """Select a backend by name and return the previously active one."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available()}")
    previous = current()
    _active = _BACKENDS[name]
    return previous


def fold(values, weights, offsets):
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    return _active.fold(values, weights, offsets)


def chol_solve(mats, rhs):
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    return _active.chol_solve(mats, rhs)
