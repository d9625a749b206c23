"""Kernel backend selection.

Hot loops are compiled with numba when it is available. Every batch kernel
also has a vectorised numpy twin, used when ``AZEMA_BACKEND=numpy`` (or when
numba cannot be imported). Both backends consume the same counter-based
random streams, so they produce the same numbers up to floating-point
reassociation.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("AZEMA_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"AZEMA_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_backend = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def backend():
    """Name of the active backend."""
    return _backend


def set_backend(name):
    """Switch backend at runtime (benchmark and tests)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


def use_numba():
    return _backend == "numba"


def njit(fn):
    """``numba.njit(nogil=True, cache=True)`` or the identity without numba."""
    if HAVE_NUMBA:
        return numba.njit(nogil=True, cache=True)(fn)
    return fn  # pragma: no cover


def pyfunc(fn):
    """The uncompiled Python body of a kernel."""
    return getattr(fn, "py_func", fn)


def pick(jitted):
    """The compiled kernel under the numba backend, its Python body otherwise."""
    return jitted if use_numba() else pyfunc(jitted)
