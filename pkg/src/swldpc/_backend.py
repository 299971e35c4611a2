"""Kernel backend selection.

Hot loops ship in two flavours: a numba ``@njit`` kernel and a vectorised
numpy kernel with identical semantics.  The active one is picked at import
time from ``SWLDPC_BACKEND`` (``numba`` or ``numpy``); numba is used when it
is importable and the variable is unset.
"""
from __future__ import annotations

import functools
import os

BACKEND_ENV = "SWLDPC_BACKEND"

try:
    import numba

    NUMBA_OK = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    NUMBA_OK = False


def _resolve() -> str:
    wanted = os.environ.get(BACKEND_ENV, "").strip().lower()
    if wanted in ("", "auto"):
        return "numba" if NUMBA_OK else "numpy"
    if wanted not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numba" and not NUMBA_OK:
        raise ImportError(f"{BACKEND_ENV}=numba but numba is not installed")
    return wanted


BACKEND = _resolve()


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op when numba is missing.

    Kernels are always compiled when numba exists so that both paths can be
    compared in one process; ``BACKEND`` only decides which one the public
    functions dispatch to.
    """
    kwargs.setdefault("cache", True)
    if NUMBA_OK:
        return numba.njit(*args, **kwargs)

    def deco(f):
        @functools.wraps(f)
        def wrapper(*a, **kw):
            return f(*a, **kw)

        return wrapper

    if len(args) == 1 and callable(args[0]) and not kwargs.get("signature"):
        return deco(args[0])
    return deco


def pick(numba_impl, numpy_impl, backend: str | None = None):
    """Return the implementation for ``backend`` (default: the active one)."""
    b = backend or BACKEND
    if b == "numba":
        if not NUMBA_OK:
            raise ImportError("numba backend requested but numba is not installed")
        return numba_impl
    if b == "numpy":
        return numpy_impl
    raise ValueError(f"unknown backend {b!r}")
