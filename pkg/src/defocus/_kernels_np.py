"""Pure-numpy implementations of the hot raster kernels.

Every function here has a numba twin in `_kernels_nb` with the same
signature and the same arithmetic (same summation order wherever the
result is sensitive to it). `defocus.kernels` picks one of the two at
import time.

All kernels take 2-D float64 arrays and handle borders by replication.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def convolve_axis0(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Correlate each column with a 1-D tap vector, replicate borders."""
    k = taps.size
    if k == 1:
        return img * taps[0]
    r = k // 2
    padded = np.pad(img, ((r, r), (0, 0)), mode="edge")
    windows = sliding_window_view(padded, k, axis=0)
    return windows @ taps


def convolve_axis1(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Correlate each row with a 1-D tap vector, replicate borders."""
    k = taps.size
    if k == 1:
        return img * taps[0]
    r = k // 2
    padded = np.pad(img, ((0, 0), (r, r)), mode="edge")
    windows = sliding_window_view(padded, k, axis=1)
    return windows @ taps


def _window_sum_axis(a: np.ndarray, lo: int, hi: int, axis: int) -> np.ndarray:
    """Sum over the window [i-lo, i+hi] along `axis`, replicate borders.

    Prefix-sum formulation: cost independent of the window size.
    """
    pad = [(0, 0), (0, 0)]
    pad[axis] = (lo, hi)
    p = np.pad(a, pad, mode="edge")
    c = np.cumsum(p, axis=axis)
    w = lo + hi + 1
    if axis == 0:
        zeros = np.zeros((1, c.shape[1]), dtype=c.dtype)
        c = np.concatenate([zeros, c], axis=0)
        return c[w:, :] - c[: c.shape[0] - w, :]
    zeros = np.zeros((c.shape[0], 1), dtype=c.dtype)
    c = np.concatenate([zeros, c], axis=1)
    return c[:, w:] - c[:, : c.shape[1] - w]


def window_sum(img: np.ndarray, lo_y: int, hi_y: int, lo_x: int, hi_x: int) -> np.ndarray:
    """Rectangular window sums with replicate borders."""
    s = _window_sum_axis(img, lo_y, hi_y, axis=0)
    return _window_sum_axis(s, lo_x, hi_x, axis=1)


def box_sum(img: np.ndarray, radius: int) -> np.ndarray:
    """(2r+1) x (2r+1) window sums with replicate borders."""
    if radius == 0:
        return img.copy()
    return window_sum(img, radius, radius, radius, radius)


def laplacian4(img: np.ndarray) -> np.ndarray:
    """4-neighbour Laplacian stencil with replicate borders."""
    p = np.pad(img, 1, mode="edge")
    up = p[:-2, 1:-1]
    down = p[2:, 1:-1]
    left = p[1:-1, :-2]
    right = p[1:-1, 2:]
    return ((up + down) + left) + right - 4.0 * img


def window_entropy(codes: np.ndarray, window: int) -> np.ndarray:
    """Shannon entropy (bits) of the 256-bin histogram over a w x w window.

    `codes` is a uint8 raster. For even `window` the window spans
    [i - w//2, i + w - 1 - w//2] on each axis.
    """
    lo = window // 2
    hi = window - 1 - lo
    n = float(window * window)
    ent = np.zeros(codes.shape, dtype=np.float64)
    for b in range(256):
        cnt = window_sum((codes == b).astype(np.float64), lo, hi, lo, hi)
        p = cnt / n
        mask = cnt > 0.0
        ent[mask] -= p[mask] * np.log2(p[mask])
    return ent
