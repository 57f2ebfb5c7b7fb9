"""Kernel backend selection.

Hot numeric loops (Newton grids, separated-set extraction, escape-time
rendering) have two interchangeable implementations: numba-jitted loops and
pure numpy.  The HF_KERNELS environment variable picks one:

    HF_KERNELS=numba   require numba (ImportError if unavailable)
    HF_KERNELS=numpy   force the pure-numpy path
    HF_KERNELS=auto    numba when importable, numpy otherwise (default)

Resolution happens once, at first use.
"""

from __future__ import annotations

import os

_BACKEND = None


def get_backend():
    global _BACKEND
    if _BACKEND is None:
        choice = os.environ.get("HF_KERNELS", "auto").strip().lower()
        if choice not in ("auto", "numba", "numpy"):
            raise ValueError(
                f"HF_KERNELS must be auto, numba, or numpy (got {choice!r})"
            )
        if choice == "numpy":
            from . import numpy_backend as mod
        elif choice == "numba":
            from . import numba_backend as mod
        else:
            try:
                from . import numba_backend as mod
            except ImportError:
                from . import numpy_backend as mod
        _BACKEND = mod
    return _BACKEND


def backend_name() -> str:
    return get_backend().NAME


def newton_solve(fmap, z0, w, tol, max_rounds=60):
    return get_backend().newton_solve(fmap, z0, w, tol, max_rounds)


def greedy_counts(orbits, eps, n_max):
    return get_backend().greedy_counts(orbits, eps, n_max)


def escape_counts(fmap, z0, max_iter, escape_radius):
    return get_backend().escape_counts(fmap, z0, max_iter, escape_radius)
