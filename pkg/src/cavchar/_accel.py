"""Optional numba acceleration.

Kernels are written twice: a loop form compiled with ``numba.njit`` and a
vectorised numpy form. The numba path is used when numba imports and the
environment variable ``CAVCHAR_DISABLE_NUMBA`` is unset (or ``0``).
"""
import os

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None

_flag = os.environ.get("CAVCHAR_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(fn):
    """Compile ``fn`` in nopython mode if numba is importable, else return it."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
