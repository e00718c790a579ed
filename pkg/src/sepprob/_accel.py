"""Backend switch between numba-compiled kernels and their numpy fallbacks.

Every hot kernel in the package exists twice: an ``@njit`` scalar-loop version
and a vectorized numpy version implementing the same algorithm.  Dispatchers
consult :func:`use_jit` at call time, so the backend can be flipped at runtime
(the benchmark and the cross-backend tests do this).

Set ``SEPPROB_DISABLE_JIT=1`` to start with the numpy path.
"""

import os

DISABLE_ENV = "SEPPROB_DISABLE_JIT"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


_use_jit = HAVE_NUMBA and not _env_disabled()


def use_jit():
    return _use_jit


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global _use_jit
    previous = backend()
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not importable")
        _use_jit = True
    elif name == "numpy":
        _use_jit = False
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def backend():
    return "numba" if _use_jit else "numpy"


def njit(func):
    """Compile ``func`` with numba when available; identity otherwise."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
