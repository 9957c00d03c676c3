"""Kernel backend selection.

The hot loops in :mod:`modelsets.kernels` exist twice: a numba ``@njit``
version and a pure-numpy version. ``MODELSETS_BACKEND=numpy`` forces the
numpy path; the default is numba when it imports cleanly.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_VAR = "MODELSETS_BACKEND"
_VALID = ("numba", "numpy")


def _initial_backend():
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested == "numpy":
        return "numpy"
    if requested not in ("", "numba"):
        raise ValueError(f"{ENV_VAR} must be one of {_VALID}, got {requested!r}")
    return "numba" if HAVE_NUMBA else "numpy"


_current = _initial_backend()


def get_backend():
    return _current


def set_backend(name):
    """Switch backend at runtime; returns the previous one."""
    global _current
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    previous, _current = _current, name
    return previous


def njit(fn):
    """``numba.njit(cache=True)`` when available, else the plain function."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn
