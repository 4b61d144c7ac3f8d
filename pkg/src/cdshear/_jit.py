"""Numba shim.

Kernels are compiled with numba when it is importable and the environment
variable ``CDSHEAR_DISABLE_NUMBA`` is unset (or ``0``). Otherwise every kernel
dispatches to its vectorized numpy twin.
"""
import os

_disabled = os.environ.get("CDSHEAR_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("disabled by CDSHEAR_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def default_backend():
    return "numba" if HAVE_NUMBA else "numpy"
