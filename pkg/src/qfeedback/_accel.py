"""Select the compiled or pure-numpy kernel path.

Set ``QFEEDBACK_DISABLE_NUMBA=1`` before import to force the numpy fallback.
When numba is not importable the fallback is used automatically.
"""

import os

_FLAG = os.environ.get("QFEEDBACK_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator.

    The decorated function stays importable in both modes so the two paths can
    be compared side by side in tests and benchmarks.
    """
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func
    return _numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
