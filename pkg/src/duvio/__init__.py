"""duvio: dehazing-aided underwater visual-inertial odometry toolkit.

Subpackages: dataio (sequences, interpolation, windows), disturb
(turbidity/distortion synthesis), dehaze (enhancement GAN + image
metrics), vionet (pose network), eval (RMSE scoring and reports),
experiment/cli (end-to-end pipeline).
"""

__version__ = "0.1.0"

from . import backend

__all__ = ["backend", "__version__"]
