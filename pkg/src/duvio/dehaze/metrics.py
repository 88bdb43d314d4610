"""Full-reference image quality metrics (PSNR / SSIM / MSE / RMSE).

Inputs are rasters in [0, 1]; MSE/RMSE/PSNR are computed on the 8-bit
(0..255) scale.  SSIM uses an 11x11 Gaussian window (sigma 1.5) with the
standard constants K1=0.01, K2=0.03 and reflect boundaries; its value is
invariant to the 0..1 vs 0..255 scaling.
"""

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..disturb import gaussian_taps
from ..errors import ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Published dehazing-generator ablation scores on the modified harbor
# imagery (reference values, not reproduced by this package).
REFERENCE_ABLATION = {
    "dense": {"psnr": 26.8726, "ssim": 0.9612, "mse": 158.47, "rmse": 12.588},
    "resnet": {"psnr": 26.1324, "ssim": 0.9308, "mse": 203.29, "rmse": 14.258},
    "vit": {"psnr": 26.4283, "ssim": 0.9475, "mse": 176.31, "rmse": 13.278},
    "mobile": {"psnr": 25.5721, "ssim": 0.9026, "mse": 242.75, "rmse": 15.580},
    "vgg": {"psnr": 25.3408, "ssim": 0.8859, "mse": 263.18, "rmse": 16.222},
}

# Published comparison scores for other enhancement frameworks
# (reference values, not reproduced by this package).
REFERENCE_DEHAZE_BENCHMARK = {
    "FDA": {"psnr": 24.0709, "ssim": 0.8807, "mse": 249.23, "rmse": 15.787},
    "DehazeFormer-B": {"psnr": 25.5284, "ssim": 0.9357, "mse": 196.81, "rmse": 14.028},
    "FFA-Net": {"psnr": 24.9351, "ssim": 0.9063, "mse": 224.62, "rmse": 14.987},
}


@dataclass(frozen=True)
class ImageQualityReport:
    psnr: float   # dB; math.inf when mse == 0
    ssim: float
    mse: float    # squared 8-bit intensity units
    rmse: float   # 8-bit intensity units

    def as_dict(self):
        return {"psnr": self.psnr, "ssim": self.ssim,
                "mse": self.mse, "rmse": self.rmse}

    def format_row(self, label=""):
        psnr = min(self.psnr, 99.0)  # text output caps the identity sentinel
        return (f"{label:<16s} psnr={psnr:7.4f} dB  ssim={self.ssim:.4f}  "
                f"mse={self.mse:.4f}  rmse={self.rmse:.4f}")


def mse_255(reference, candidate):
    diff = (np.asarray(reference, dtype=np.float64)
            - np.asarray(candidate, dtype=np.float64)) * 255.0
    return float(np.mean(diff * diff))


def psnr_from_mse(mse):
    if mse <= 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def ssim(reference, candidate):
    """Mean SSIM map over the image with Gaussian-window local statistics."""
    x = np.asarray(reference, dtype=np.float64)
    y = np.asarray(candidate, dtype=np.float64)
    taps = gaussian_taps(SSIM_SIGMA, radius=SSIM_WINDOW // 2)

    def smooth(img):
        return kernels.correlate1d(kernels.correlate1d(img, taps, 0), taps, 1)

    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_x, mu_y = smooth(x), smooth(y)
    sxx = smooth(x * x) - mu_x * mu_x
    syy = smooth(y * y) - mu_y * mu_y
    sxy = smooth(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def image_metrics(reference, candidate):
    """Quality report of candidate against reference (equal shapes)."""
    ref = np.asarray(reference, dtype=np.float64)
    cand = np.asarray(candidate, dtype=np.float64)
    if ref.shape != cand.shape:
        raise ShapeError(ref.shape, cand.shape, what="candidate raster")
    mse = mse_255(ref, cand)
    return ImageQualityReport(psnr=psnr_from_mse(mse), ssim=ssim(ref, cand),
                              mse=mse, rmse=math.sqrt(mse))
