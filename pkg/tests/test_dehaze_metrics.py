"""Metric checks against independent brute-force oracles."""

import math

import numpy as np
import pytest

from duvio.dehaze import (REFERENCE_ABLATION, image_metrics, mse_255,
                          psnr_from_mse, ssim)
from duvio.errors import ShapeError


# --------------------------------------------------------------- oracles

def oracle_mse_255(ref, cand):
    total = 0.0
    h, w = ref.shape
    for y in range(h):
        for x in range(w):
            d = (ref[y, x] - cand[y, x]) * 255.0
            total += d * d
    return total / (h * w)


def _reflect(i, n):
    if n == 1:
        return 0
    period = 2 * n - 2
    i %= period
    return period - i if i >= n else i


def oracle_ssim(ref, cand, window=11, sigma=1.5, k1=0.01, k2=0.03):
    r = window // 2
    xs = np.arange(-r, r + 1, dtype=float)
    taps = np.exp(-0.5 * (xs / sigma) ** 2)
    taps /= taps.sum()
    kern = np.outer(taps, taps)
    h, w = ref.shape
    c1, c2 = k1 ** 2, k2 ** 2
    total = 0.0
    for y in range(h):
        for x in range(w):
            mx = my = sxx = syy = sxy = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    wgt = kern[dy + r, dx + r]
                    a = ref[_reflect(y + dy, h), _reflect(x + dx, w)]
                    b = cand[_reflect(y + dy, h), _reflect(x + dx, w)]
                    mx += wgt * a
                    my += wgt * b
                    sxx += wgt * a * a
                    syy += wgt * b * b
                    sxy += wgt * a * b
            vx = sxx - mx * mx
            vy = syy - my * my
            cov = sxy - mx * my
            total += (((2 * mx * my + c1) * (2 * cov + c2))
                      / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return total / (h * w)


# ---------------------------------------------------------------- tests

def test_identity_report(rng):
    img = rng.uniform(size=(12, 14))
    rep = image_metrics(img, img)
    assert rep.mse == 0.0
    assert rep.rmse == 0.0
    assert math.isinf(rep.psnr)
    assert rep.ssim == pytest.approx(1.0, abs=1e-12)
    assert "99.0000" in rep.format_row("self")  # text output caps at 99 dB


def test_published_rows_internal_consistency():
    # sqrt(mse) must reproduce the published rmse within 0.001
    assert math.sqrt(158.47) == pytest.approx(12.588, abs=1e-3)
    assert math.sqrt(203.29) == pytest.approx(14.258, abs=1e-3)
    for row in REFERENCE_ABLATION.values():
        assert math.sqrt(row["mse"]) == pytest.approx(row["rmse"], abs=1e-3)


def test_uniform_offset_closed_form():
    ref = np.full((8, 8), 100.0 / 255.0)
    cand = np.full((8, 8), 110.0 / 255.0)
    rep = image_metrics(ref, cand)
    assert rep.mse == pytest.approx(100.0, rel=1e-12)
    assert rep.psnr == pytest.approx(10.0 * math.log10(255.0 ** 2 / 100.0), rel=1e-12)
    assert rep.rmse == pytest.approx(10.0, rel=1e-12)


def test_shape_mismatch_rejected(rng):
    with pytest.raises(ShapeError):
        image_metrics(rng.uniform(size=(8, 8)), rng.uniform(size=(8, 9)))


def test_mse_matches_oracle(rng):
    for _ in range(20):
        ref = rng.uniform(size=(9, 13))
        cand = rng.uniform(size=(9, 13))
        assert mse_255(ref, cand) == pytest.approx(oracle_mse_255(ref, cand), rel=1e-12)


def test_ssim_matches_oracle(rng):
    for _ in range(5):
        ref = rng.uniform(size=(14, 12))
        cand = np.clip(ref + rng.normal(0, 0.08, size=ref.shape), 0, 1)
        assert ssim(ref, cand) == pytest.approx(oracle_ssim(ref, cand), rel=1e-9)


def test_ssim_symmetric_and_unit_at_identity(rng):
    for _ in range(10):
        a = rng.uniform(size=(10, 10))
        b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-9)


def test_psnr_strictly_decreasing_in_mse(rng):
    mses = np.sort(rng.uniform(1.0, 5000.0, size=30))
    psnrs = [psnr_from_mse(m) for m in mses]
    assert all(a > b for a, b in zip(psnrs, psnrs[1:]))


def test_rmse_squared_equals_mse(rng):
    for _ in range(20):
        rep = image_metrics(rng.uniform(size=(7, 7)), rng.uniform(size=(7, 7)))
        assert rep.rmse ** 2 == pytest.approx(rep.mse, rel=1e-9)
