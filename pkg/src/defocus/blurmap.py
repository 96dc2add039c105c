"""Dense per-pixel blur map from patch-level predictions.

32x32 windows are placed every `step` pixels plus one extra window
flushed to the right/bottom edge, so every pixel is covered. Each
window's integer prediction is summed into an integer accumulator and
divided by the coverage count once per pixel, which makes the result
independent of scheduling order.
"""

from dataclasses import dataclass

import numpy as np

from . import imgcore, kernels
from .dataset import NUM_LEVELS, PATCH


@dataclass
class BlurMap:
    values: np.ndarray  # (H, W) float64 in [0, 19]
    step: int
    backend_id: str = ""

    @property
    def shape(self):
        return self.values.shape


def window_origins(extent: int, step: int) -> list:
    """Window start offsets along one axis: multiples of `step`, plus an
    edge-flushed window when the last multiple falls short."""
    if extent < PATCH:
        raise ValueError(f"image extent {extent} smaller than window size {PATCH}")
    origins = list(range(0, extent - PATCH + 1, step))
    if origins[-1] != extent - PATCH:
        origins.append(extent - PATCH)
    return origins


def _check_step(step: int) -> None:
    if not 1 <= step <= PATCH:
        raise ValueError(f"step must be in [1, {PATCH}], got {step}")


def _predict_fn(backend):
    if hasattr(backend, "predict_window"):
        return lambda patch, x, y: backend.predict_window(patch, x, y)
    if hasattr(backend, "predict"):
        return lambda patch, x, y: backend.predict(patch)
    raise TypeError("backend must expose predict(patch) or predict_window(patch, x, y)")


def estimate_map(img: np.ndarray, backend, step: int = 16) -> BlurMap:
    """Average the integer blur predictions of every window covering each
    pixel. Color input is converted to grayscale first."""
    gray = imgcore.to_grayscale(imgcore.ensure_image(img))
    _check_step(step)
    h, w = gray.shape
    predict = _predict_fn(backend)
    sums = np.zeros((h, w), dtype=np.int64)
    counts = np.zeros((h, w), dtype=np.int64)
    for y0 in window_origins(h, step):
        for x0 in window_origins(w, step):
            patch = gray[y0 : y0 + PATCH, x0 : x0 + PATCH]
            label = int(predict(patch, x0, y0))
            if not 0 <= label < NUM_LEVELS:
                raise ValueError(f"backend returned out-of-range level {label}")
            sums[y0 : y0 + PATCH, x0 : x0 + PATCH] += label
            counts[y0 : y0 + PATCH, x0 : x0 + PATCH] += 1
    values = sums / counts
    return BlurMap(values, step, backend_id=type(backend).__name__)


def coverage_count(width: int, height: int, step: int) -> np.ndarray:
    """How many windows of the placement rule cover each pixel."""
    _check_step(step)
    counts = np.zeros((height, width), dtype=np.int64)
    for y0 in window_origins(height, step):
        for x0 in window_origins(width, step):
            counts[y0 : y0 + PATCH, x0 : x0 + PATCH] += 1
    return counts


# ---------------------------------------------------------------------------
# classical per-window statistic baselines
# ---------------------------------------------------------------------------

CLASSICAL_METHODS = ("entropy", "stddev", "var_laplacian")


def classical_map(img: np.ndarray, method: str, window: int = 16) -> np.ndarray:
    """Per-pixel sharpness statistic over a centred `window` x `window`
    neighbourhood (replicate borders; even windows span
    [i - w//2, i + w - 1 - w//2]).

    Raw statistic values, not blur levels. For every method a *higher*
    value marks a *sharper*/busier neighbourhood, the opposite
    orientation of the learned blur map.
    """
    gray = imgcore.ensure_gray(img)
    if window < 1:
        raise ValueError("window must be >= 1")
    lo = window // 2
    hi = window - 1 - lo
    n = float(window * window)
    if method == "entropy":
        codes = np.rint(np.clip(gray, 0.0, 1.0) * 255).astype(np.uint8)
        return kernels.window_entropy(codes, window)
    if method == "stddev":
        return np.sqrt(_window_variance(gray, lo, hi, n))
    if method == "var_laplacian":
        return _window_variance(kernels.laplacian4(gray), lo, hi, n)
    raise ValueError(f"unknown method {method!r}, expected one of {CLASSICAL_METHODS}")


def _window_variance(field: np.ndarray, lo: int, hi: int, n: float) -> np.ndarray:
    # centring on the global mean keeps constant inputs at exactly zero
    centred = field - field.mean()
    s1 = kernels.window_sum(centred, lo, hi, lo, hi)
    s2 = kernels.window_sum(centred * centred, lo, hi, lo, hi)
    return np.maximum(s2 / n - (s1 / n) ** 2, 0.0)


def predict_runtime(t_per_patch: float, pixels: int, step: int) -> float:
    """Wall time to classify every window of an image: T * N / step^2."""
    if t_per_patch <= 0 or pixels <= 0 or step <= 0:
        raise ValueError("all inputs must be positive")
    return t_per_patch * pixels / (step * step)
