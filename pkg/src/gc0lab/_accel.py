"""Numba switch.

Set GC0LAB_DISABLE_NUMBA=1 to force the pure-numpy kernels (useful for
debugging and for the kernel benchmark).
"""
import os

DISABLED = os.environ.get("GC0LAB_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    if DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """`numba.njit(cache=True)` when available, identity otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        fn = args[0]
        return _njit(cache=True)(fn) if HAVE_NUMBA else fn

    def deco(fn):
        if not HAVE_NUMBA:
            return fn
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)(fn)

    return deco


def pick(fast, slow):
    return fast if HAVE_NUMBA else slow
