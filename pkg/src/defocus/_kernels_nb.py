"""Numba-compiled twins of the kernels in `_kernels_np`.

Rows (or columns) are independent in every parallel loop, so results are
bit-identical no matter how many threads numba uses. The box/window sums
run the exact prefix-sum arithmetic of the numpy versions and therefore
match them bit for bit; the convolutions differ from the BLAS path only
by summation order (<= a few ulp).
"""

import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def convolve_axis0(img, taps):
    h, w = img.shape
    k = taps.size
    if k == 1:
        return img * taps[0]
    r = k // 2
    out = np.empty((h, w))
    for j in prange(w):
        for i in range(h):
            acc = 0.0
            for t in range(k):
                ii = i + t - r
                if ii < 0:
                    ii = 0
                elif ii >= h:
                    ii = h - 1
                acc += img[ii, j] * taps[t]
            out[i, j] = acc
    return out


@njit(cache=True, parallel=True)
def convolve_axis1(img, taps):
    h, w = img.shape
    k = taps.size
    if k == 1:
        return img * taps[0]
    r = k // 2
    out = np.empty((h, w))
    for i in prange(h):
        for j in range(w):
            acc = 0.0
            for t in range(k):
                jj = j + t - r
                if jj < 0:
                    jj = 0
                elif jj >= w:
                    jj = w - 1
                acc += img[i, jj] * taps[t]
            out[i, j] = acc
    return out


@njit(cache=True, parallel=True)
def _window_sum_rows(a, lo, hi):
    # prefix sums over each replicate-padded row, then window differences
    h, w = a.shape
    out = np.empty((h, w))
    span = lo + hi + 1
    for i in prange(h):
        c = np.empty(w + lo + hi + 1)
        c[0] = 0.0
        acc = 0.0
        for j in range(w + lo + hi):
            jj = j - lo
            if jj < 0:
                jj = 0
            elif jj >= w:
                jj = w - 1
            acc += a[i, jj]
            c[j + 1] = acc
        for j in range(w):
            out[i, j] = c[j + span] - c[j]
    return out


@njit(cache=True, parallel=True)
def _window_sum_cols(a, lo, hi):
    h, w = a.shape
    out = np.empty((h, w))
    span = lo + hi + 1
    for j in prange(w):
        c = np.empty(h + lo + hi + 1)
        c[0] = 0.0
        acc = 0.0
        for i in range(h + lo + hi):
            ii = i - lo
            if ii < 0:
                ii = 0
            elif ii >= h:
                ii = h - 1
            acc += a[ii, j]
            c[i + 1] = acc
        for i in range(h):
            out[i, j] = c[i + span] - c[i]
    return out


@njit(cache=True)
def window_sum(img, lo_y, hi_y, lo_x, hi_x):
    s = _window_sum_cols(img, lo_y, hi_y)
    return _window_sum_rows(s, lo_x, hi_x)


@njit(cache=True)
def box_sum(img, radius):
    if radius == 0:
        return img.copy()
    return window_sum(img, radius, radius, radius, radius)


@njit(cache=True, parallel=True)
def laplacian4(img):
    h, w = img.shape
    out = np.empty((h, w))
    for i in prange(h):
        for j in range(w):
            iu = i - 1 if i > 0 else 0
            id_ = i + 1 if i < h - 1 else h - 1
            jl = j - 1 if j > 0 else 0
            jr = j + 1 if j < w - 1 else w - 1
            out[i, j] = ((img[iu, j] + img[id_, j]) + img[i, jl]) + img[i, jr] - 4.0 * img[i, j]
    return out


@njit(cache=True, parallel=True)
def window_entropy(codes, window):
    h, w = codes.shape
    lo = window // 2
    hi = window - 1 - lo
    n = float(window * window)
    out = np.empty((h, w))
    for i in prange(h):
        hist = np.empty(256, dtype=np.int64)
        for j in range(w):
            hist[:] = 0
            for di in range(-lo, hi + 1):
                ii = i + di
                if ii < 0:
                    ii = 0
                elif ii >= h:
                    ii = h - 1
                for dj in range(-lo, hi + 1):
                    jj = j + dj
                    if jj < 0:
                        jj = 0
                    elif jj >= w:
                        jj = w - 1
                    hist[codes[ii, jj]] += 1
            ent = 0.0
            for b in range(256):
                if hist[b] > 0:
                    p = hist[b] / n
                    ent -= p * np.log2(p)
            out[i, j] = ent
    return out
