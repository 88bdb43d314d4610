"""Pure-numpy kernel implementations (im2col + BLAS)."""

import numpy as np


def _pad2d(x, ph, pw):
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def _windows(xp, kh, kw, sh, sw, ho, wo):
    # view of all (kh, kw) patches: (B, C, kh, kw, ho, wo)
    s0, s1, s2, s3 = xp.strides
    shape = (xp.shape[0], xp.shape[1], kh, kw, ho, wo)
    strides = (s0, s1, s2, s3, sh * s2, sw * s3)
    return np.lib.stride_tricks.as_strided(xp, shape, strides)


def conv2d_fwd(x, w, stride, pad):
    """Cross-correlate x (B,C,H,W) with w (O,C,kh,kw); no bias."""
    sh, sw = stride
    ph, pw = pad
    o, c, kh, kw = w.shape
    b, _, h, wid = x.shape
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wid + 2 * pw - kw) // sw + 1
    xp = _pad2d(x, ph, pw)
    cols = _windows(xp, kh, kw, sh, sw, ho, wo).reshape(b, c * kh * kw, ho * wo)
    y = np.matmul(w.reshape(o, c * kh * kw), cols)
    return y.reshape(b, o, ho, wo)


def conv2d_gx(dy, w, stride, pad, h, wid):
    """Gradient of conv2d_fwd w.r.t. x; (h, wid) is the unpadded input size."""
    sh, sw = stride
    ph, pw = pad
    o, c, kh, kw = w.shape
    b, _, ho, wo = dy.shape
    dcols = np.matmul(w.reshape(o, c * kh * kw).T, dy.reshape(b, o, ho * wo))
    dwin = dcols.reshape(b, c, kh, kw, ho, wo)
    dxp = np.zeros((b, c, h + 2 * ph, wid + 2 * pw), dtype=dy.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += dwin[:, :, i, j]
    if ph or pw:
        return np.ascontiguousarray(dxp[:, :, ph:ph + h, pw:pw + wid])
    return dxp


def conv2d_gw(x, dy, stride, pad, kh, kw):
    """Gradient of conv2d_fwd w.r.t. w."""
    sh, sw = stride
    ph, pw = pad
    b, c, h, wid = x.shape
    _, o, ho, wo = dy.shape
    xp = _pad2d(x, ph, pw)
    cols = _windows(xp, kh, kw, sh, sw, ho, wo).reshape(b, c * kh * kw, ho * wo)
    dw = np.matmul(dy.reshape(b, o, ho * wo), cols.transpose(0, 2, 1)).sum(axis=0)
    return dw.reshape(o, c, kh, kw)


def depthwise2d_fwd(x, w, stride, pad):
    """Per-channel cross-correlation: x (B,C,H,W), w (C,kh,kw)."""
    sh, sw = stride
    ph, pw = pad
    c, kh, kw = w.shape
    b, _, h, wid = x.shape
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wid + 2 * pw - kw) // sw + 1
    xp = _pad2d(x, ph, pw)
    win = _windows(xp, kh, kw, sh, sw, ho, wo)
    return np.einsum("bcijyx,cij->bcyx", win, w, optimize=True)


def depthwise2d_gx(dy, w, stride, pad, h, wid):
    sh, sw = stride
    ph, pw = pad
    c, kh, kw = w.shape
    b, _, ho, wo = dy.shape
    dxp = np.zeros((b, c, h + 2 * ph, wid + 2 * pw), dtype=dy.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += (
                w[None, :, i, j, None, None] * dy
            )
    if ph or pw:
        return np.ascontiguousarray(dxp[:, :, ph:ph + h, pw:pw + wid])
    return dxp


def depthwise2d_gw(x, dy, stride, pad, kh, kw):
    sh, sw = stride
    ph, pw = pad
    b, c, h, wid = x.shape
    _, _, ho, wo = dy.shape
    xp = _pad2d(x, ph, pw)
    win = _windows(xp, kh, kw, sh, sw, ho, wo)
    return np.einsum("bcijyx,bcyx->cij", win, dy, optimize=True)


def correlate1d(img, taps, axis):
    """Correlate a 2-D image with symmetric-length taps along one axis.

    Boundaries use reflect padding (edge value not repeated), matching
    np.pad(mode='reflect').
    """
    r = len(taps) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    xp = np.pad(img, pad, mode="reflect")
    out = np.zeros_like(img)
    n = img.shape[axis]
    for i, t in enumerate(taps):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + n)
        out += t * xp[tuple(sl)]
    return out


def warp_bilinear(img, map_y, map_x):
    """Sample img (H,W) at float coordinates, clamped to the border."""
    h, w = img.shape
    my = np.clip(map_y, 0.0, h - 1.0)
    mx = np.clip(map_x, 0.0, w - 1.0)
    y0 = np.floor(my).astype(np.int64)
    x0 = np.floor(mx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = my - y0
    fx = mx - x0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy
