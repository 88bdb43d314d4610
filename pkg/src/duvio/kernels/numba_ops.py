"""Numba @njit kernel implementations.

Loop nests parallelize over independent output elements only (no
cross-thread reductions), so results are bitwise reproducible and
independent of the thread count.  fastmath stays off for the same reason.
"""

import numpy as np
from numba import njit, prange

_JIT = dict(cache=True, parallel=True, fastmath=False)


@njit(**_JIT)
def _conv2d_fwd(x, w, sh, sw, ph, pw):
    b, c, h, wid = x.shape
    o, _, kh, kw = w.shape
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wid + 2 * pw - kw) // sw + 1
    y = np.zeros((b, o, ho, wo), dtype=x.dtype)
    for bi in prange(b):
        for oi in range(o):
            for yy in range(ho):
                iy0 = yy * sh - ph
                for xx in range(wo):
                    ix0 = xx * sw - pw
                    acc = 0.0
                    for ci in range(c):
                        for i in range(kh):
                            iy = iy0 + i
                            if iy < 0 or iy >= h:
                                continue
                            for j in range(kw):
                                ix = ix0 + j
                                if ix < 0 or ix >= wid:
                                    continue
                                acc += x[bi, ci, iy, ix] * w[oi, ci, i, j]
                    y[bi, oi, yy, xx] = acc
    return y


@njit(**_JIT)
def _conv2d_gx(dy, w, sh, sw, ph, pw, h, wid):
    b, o, ho, wo = dy.shape
    _, c, kh, kw = w.shape
    dx = np.zeros((b, c, h, wid), dtype=dy.dtype)
    for bi in prange(b):
        for oi in range(o):
            for yy in range(ho):
                iy0 = yy * sh - ph
                for xx in range(wo):
                    ix0 = xx * sw - pw
                    g = dy[bi, oi, yy, xx]
                    for ci in range(c):
                        for i in range(kh):
                            iy = iy0 + i
                            if iy < 0 or iy >= h:
                                continue
                            for j in range(kw):
                                ix = ix0 + j
                                if ix < 0 or ix >= wid:
                                    continue
                                dx[bi, ci, iy, ix] += g * w[oi, ci, i, j]
    return dx


@njit(**_JIT)
def _conv2d_gw(x, dy, sh, sw, ph, pw, kh, kw):
    b, c, h, wid = x.shape
    _, o, ho, wo = dy.shape
    dw = np.zeros((o, c, kh, kw), dtype=x.dtype)
    for oi in prange(o):
        for ci in range(c):
            for i in range(kh):
                for j in range(kw):
                    acc = 0.0
                    for bi in range(b):
                        for yy in range(ho):
                            iy = yy * sh - ph + i
                            if iy < 0 or iy >= h:
                                continue
                            for xx in range(wo):
                                ix = xx * sw - pw + j
                                if ix < 0 or ix >= wid:
                                    continue
                                acc += x[bi, ci, iy, ix] * dy[bi, oi, yy, xx]
                    dw[oi, ci, i, j] = acc
    return dw


@njit(**_JIT)
def _depthwise2d_fwd(x, w, sh, sw, ph, pw):
    b, c, h, wid = x.shape
    _, kh, kw = w.shape
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wid + 2 * pw - kw) // sw + 1
    y = np.zeros((b, c, ho, wo), dtype=x.dtype)
    for bi in prange(b):
        for ci in range(c):
            for yy in range(ho):
                iy0 = yy * sh - ph
                for xx in range(wo):
                    ix0 = xx * sw - pw
                    acc = 0.0
                    for i in range(kh):
                        iy = iy0 + i
                        if iy < 0 or iy >= h:
                            continue
                        for j in range(kw):
                            ix = ix0 + j
                            if ix < 0 or ix >= wid:
                                continue
                            acc += x[bi, ci, iy, ix] * w[ci, i, j]
                    y[bi, ci, yy, xx] = acc
    return y


@njit(**_JIT)
def _depthwise2d_gx(dy, w, sh, sw, ph, pw, h, wid):
    b, c, ho, wo = dy.shape
    _, kh, kw = w.shape
    dx = np.zeros((b, c, h, wid), dtype=dy.dtype)
    for bi in prange(b):
        for ci in range(c):
            for yy in range(ho):
                iy0 = yy * sh - ph
                for xx in range(wo):
                    ix0 = xx * sw - pw
                    g = dy[bi, ci, yy, xx]
                    for i in range(kh):
                        iy = iy0 + i
                        if iy < 0 or iy >= h:
                            continue
                        for j in range(kw):
                            ix = ix0 + j
                            if ix < 0 or ix >= wid:
                                continue
                            dx[bi, ci, iy, ix] += g * w[ci, i, j]
    return dx


@njit(**_JIT)
def _depthwise2d_gw(x, dy, sh, sw, ph, pw, kh, kw):
    b, c, h, wid = x.shape
    _, _, ho, wo = dy.shape
    dw = np.zeros((c, kh, kw), dtype=x.dtype)
    for ci in prange(c):
        for i in range(kh):
            for j in range(kw):
                acc = 0.0
                for bi in range(b):
                    for yy in range(ho):
                        iy = yy * sh - ph + i
                        if iy < 0 or iy >= h:
                            continue
                        for xx in range(wo):
                            ix = xx * sw - pw + j
                            if ix < 0 or ix >= wid:
                                continue
                            acc += x[bi, ci, iy, ix] * dy[bi, ci, yy, xx]
                dw[ci, i, j] = acc
    return dw


@njit(cache=True, fastmath=False)
def _reflect(i, n):
    # mirror without repeating the edge, matching np.pad(mode='reflect')
    if n == 1:
        return 0
    period = 2 * n - 2
    i = i % period
    if i < 0:
        i += period
    if i >= n:
        i = period - i
    return i


@njit(**_JIT)
def _correlate1d(img, taps, axis):
    h, w = img.shape
    r = taps.shape[0] // 2
    out = np.zeros_like(img)
    if axis == 0:
        for y in prange(h):
            for x in range(w):
                acc = 0.0
                for k in range(taps.shape[0]):
                    acc += taps[k] * img[_reflect(y + k - r, h), x]
                out[y, x] = acc
    else:
        for y in prange(h):
            for x in range(w):
                acc = 0.0
                for k in range(taps.shape[0]):
                    acc += taps[k] * img[y, _reflect(x + k - r, w)]
                out[y, x] = acc
    return out


@njit(**_JIT)
def _warp_bilinear(img, map_y, map_x):
    h, w = img.shape
    out = np.zeros_like(img)
    for y in prange(h):
        for x in range(w):
            my = map_y[y, x]
            mx = map_x[y, x]
            if my < 0.0:
                my = 0.0
            elif my > h - 1.0:
                my = h - 1.0
            if mx < 0.0:
                mx = 0.0
            elif mx > w - 1.0:
                mx = w - 1.0
            y0 = int(np.floor(my))
            x0 = int(np.floor(mx))
            y1 = min(y0 + 1, h - 1)
            x1 = min(x0 + 1, w - 1)
            fy = my - y0
            fx = mx - x0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[y, x] = top * (1.0 - fy) + bot * fy
    return out


def conv2d_fwd(x, w, stride, pad):
    return _conv2d_fwd(x, w, stride[0], stride[1], pad[0], pad[1])


def conv2d_gx(dy, w, stride, pad, h, wid):
    return _conv2d_gx(dy, w, stride[0], stride[1], pad[0], pad[1], h, wid)


def conv2d_gw(x, dy, stride, pad, kh, kw):
    return _conv2d_gw(x, dy, stride[0], stride[1], pad[0], pad[1], kh, kw)


def depthwise2d_fwd(x, w, stride, pad):
    return _depthwise2d_fwd(x, w, stride[0], stride[1], pad[0], pad[1])


def depthwise2d_gx(dy, w, stride, pad, h, wid):
    return _depthwise2d_gx(dy, w, stride[0], stride[1], pad[0], pad[1], h, wid)


def depthwise2d_gw(x, dy, stride, pad, kh, kw):
    return _depthwise2d_gw(x, dy, stride[0], stride[1], pad[0], pad[1], kh, kw)


def correlate1d(img, taps, axis):
    return _correlate1d(img, np.ascontiguousarray(taps), axis)


def warp_bilinear(img, map_y, map_x):
    return _warp_bilinear(img, map_y, map_x)
