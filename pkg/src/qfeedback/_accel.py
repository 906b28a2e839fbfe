"""Optional numba acceleration.

Kernels are written twice: a loop form compiled with ``numba.njit`` and a
vectorised numpy form. Set ``QFEEDBACK_DISABLE_NUMBA=1`` to force the numpy
path (also used automatically when numba is not importable).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _env_disabled():
    return os.environ.get("QFEEDBACK_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(func):
    """Compile ``func`` with numba when enabled, else return it untouched."""
    if not USE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
