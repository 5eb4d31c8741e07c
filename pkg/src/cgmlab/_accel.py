"""Optional numba acceleration.

Set ``CGMLAB_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
"""
import os

DISABLED = os.environ.get("CGMLAB_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:  # pragma: no cover - depends on the environment
    if DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


def backend() -> str:
    return "numba" if HAVE_NUMBA else "python"
