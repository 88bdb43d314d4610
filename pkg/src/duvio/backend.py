"""Kernel backend selection.

Hot numeric kernels (convolutions, window filters, warps) exist twice: a
numba ``@njit`` implementation and a pure-numpy fallback.  The active
backend is chosen once from the ``DUVIO_BACKEND`` environment variable:

* ``auto`` (default) -- numba when importable, else numpy
* ``numba``          -- force numba, error if unavailable
* ``numpy``          -- force the pure-numpy path

``set_backend`` overrides the choice at runtime (used by tests and the
backend benchmark).
"""

import os

_VALID = ("auto", "numba", "numpy")
_active = None


def _resolve(name):
    if name not in _VALID:
        raise ValueError(f"DUVIO_BACKEND must be one of {_VALID}, got {name!r}")
    if name in ("auto", "numba"):
        try:
            import numba  # noqa: F401
            return "numba"
        except ImportError:
            if name == "numba":
                raise RuntimeError("DUVIO_BACKEND=numba but numba is not installed")
            return "numpy"
    return "numpy"


def active_backend():
    """Name of the backend in use: 'numba' or 'numpy'."""
    global _active
    if _active is None:
        _active = _resolve(os.environ.get("DUVIO_BACKEND", "auto"))
    return _active


def set_backend(name):
    """Force a backend ('auto', 'numba' or 'numpy'); returns the resolved name."""
    global _active
    _active = _resolve(name)
    return _active
