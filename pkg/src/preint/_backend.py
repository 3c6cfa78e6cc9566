"""Kernel backend selection.

Hot loops are written twice: a numba ``@njit`` version operating point by
point, and a vectorised numpy version. ``PREINT_DISABLE_NUMBA=1`` (or a
missing numba install) routes every call to the numpy path. The flag is read
at call time so tests and benchmarks can flip it inside one process.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

ENV_FLAG = "PREINT_DISABLE_NUMBA"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise the identity decorator."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def use_numba():
    if not HAS_NUMBA:
        return False
    return os.environ.get(ENV_FLAG, "0").strip().lower() in ("", "0", "false", "no")


def backend_name():
    return "numba" if use_numba() else "numpy"
