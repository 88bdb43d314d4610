"""Backend-dispatched numeric kernels.

Every kernel has a numba implementation and a pure-numpy fallback; the
active one is chosen by :mod:`duvio.backend` (env var ``DUVIO_BACKEND``).
"""

from .. import backend as _backend
from . import numpy_ops as _np_ops

_KERNELS = (
    "conv2d_fwd",
    "conv2d_gx",
    "conv2d_gw",
    "depthwise2d_fwd",
    "depthwise2d_gx",
    "depthwise2d_gw",
    "correlate1d",
    "warp_bilinear",
)


def _impl():
    if _backend.active_backend() == "numba":
        from . import numba_ops
        return numba_ops
    return _np_ops


def __getattr__(name):
    if name in _KERNELS:
        return getattr(_impl(), name)
    raise AttributeError(name)


def warmup():
    """Trigger jit compilation of every kernel on tiny inputs."""
    import numpy as np

    ops = _impl()
    x = np.random.default_rng(0).normal(size=(1, 2, 6, 6))
    w = np.random.default_rng(1).normal(size=(3, 2, 3, 3))
    dw = np.random.default_rng(2).normal(size=(2, 3, 3))
    y = ops.conv2d_fwd(x, w, (2, 2), (1, 1))
    ops.conv2d_gx(y, w, (2, 2), (1, 1), 6, 6)
    ops.conv2d_gw(x, y, (2, 2), (1, 1), 3, 3)
    yd = ops.depthwise2d_fwd(x, dw, (1, 1), (1, 1))
    ops.depthwise2d_gx(yd, dw, (1, 1), (1, 1), 6, 6)
    ops.depthwise2d_gw(x, yd, (1, 1), (1, 1), 3, 3)
    img = x[0, 0]
    taps = np.array([0.25, 0.5, 0.25])
    ops.correlate1d(img, taps, 0)
    ops.correlate1d(img, taps, 1)
    yy, xx = np.meshgrid(np.arange(6.0), np.arange(6.0), indexing="ij")
    ops.warp_bilinear(img, yy * 0.9, xx * 1.1)
