"""Map-driven applications: adaptive sharpening, shallow depth-of-field
synthesis, and multi-focus fusion.

All three consume a per-pixel blur-level map in [0, 19]: sharpening
modulates the unsharp-mask gain through a product of two sigmoids so
neither in-focus nor heavily blurred pixels get boosted; depth-of-field
synthesis blends a sharpened and a smoothed rendition with weights from
a nonlinear remap of the map; fusion keeps, per pixel, the least blurred
of several registered inputs via guided-filtered decision maps.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import imgcore, refine

BLUR_LEVELS = imgcore.BLUR_LEVELS
UNSHARP_SIGMA = 2.0  # base low-pass width of the unsharp mask


def _map_values(blur_map) -> np.ndarray:
    if hasattr(blur_map, "values"):
        blur_map = blur_map.values
    return imgcore.ensure_gray(blur_map)


def _per_channel(img, fn):
    if img.ndim == 2:
        return fn(img)
    return np.stack([fn(img[:, :, c]) for c in range(3)], axis=2)


def _broadcast(raster, img):
    return raster if img.ndim == 2 else raster[:, :, None]


# ---------------------------------------------------------------------------
# adaptive unsharp masking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainParams:
    """Sigmoid-product gain curve on the normalized blur level."""

    alpha1: float = 46.0
    beta1: float = 0.1
    alpha2: float = 183.0
    beta2: float = 0.27
    lambda_max: float = 2.0

    def __post_init__(self):
        if self.lambda_max <= 0:
            raise ValueError("lambda_max must be > 0")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1] (normalized map units)")


def unsharp_mask(img: np.ndarray, gain, sigma: float = UNSHARP_SIGMA) -> np.ndarray:
    """Sharpen by adding back the high-pass residual: I + gain * (I - B).

    `gain` is a scalar or a per-pixel raster of the image's size; the
    low-pass B is a Gaussian blur of width `sigma`. Output clamped to
    [0, 1].
    """
    img = imgcore.ensure_image(img)
    if np.ndim(gain) not in (0, 2):
        raise ValueError("gain must be a scalar or a 2-D raster")
    if np.ndim(gain) == 2:
        gain = np.asarray(gain, dtype=np.float64)
        if gain.shape != img.shape[:2]:
            raise ValueError(f"gain raster {gain.shape} does not match image "
                             f"{img.shape[:2]}")
        gain = _broadcast(gain, img)
    low = imgcore.blur_image(img, sigma)
    return np.clip(img + gain * (img - low), 0.0, 1.0)


def gain_components(m: np.ndarray, params: GainParams):
    """The two sigmoid factors evaluated on normalized map values.

    The falling factor is computed as 1/(1+e^a) rather than 1 - 1/(1+e^-a)
    so it stays strictly positive instead of rounding to zero once the
    rising exponential passes 1 ulp.
    """
    lam1 = 1.0 / (1.0 + np.exp(-params.alpha1 * (m - params.beta1)))
    lam2 = 1.0 / (1.0 + np.exp(params.alpha2 * (m - params.beta2)))
    return lam1, lam2


def gain_map(blur_map, params: GainParams = GainParams()) -> np.ndarray:
    """Per-pixel sharpening gain lambda_max * lam1(m) * lam2(m) with
    m = map / 19 in [0, 1]."""
    m = _map_values(blur_map) / BLUR_LEVELS
    lam1, lam2 = gain_components(m, params)
    return params.lambda_max * lam1 * lam2


def adaptive_enhance(img: np.ndarray, blur_map,
                     params: GainParams = GainParams(),
                     sigma: float = UNSHARP_SIGMA) -> np.ndarray:
    """Unsharp masking with the per-pixel gain from `gain_map`."""
    img = imgcore.ensure_image(img)
    values = _map_values(blur_map)
    if values.shape != img.shape[:2]:
        raise ValueError(f"map {values.shape} does not match image {img.shape[:2]}")
    return unsharp_mask(img, gain_map(values, params), sigma)


# ---------------------------------------------------------------------------
# shallow depth of field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SDoFParams:
    """Anchors and rendering knobs for depth-of-field synthesis.

    (anchor_sharp, weight_sharp) and (anchor_blurred, weight_blurred)
    pin the blend weight at two blur levels; the weight curve between
    them comes from `solve_sdof_weights`.
    """

    anchor_sharp: float = 1.0  # c0: level treated as fully in focus
    anchor_blurred: float = 7.0  # c1: level treated as fully out of focus
    weight_sharp: float = 0.999  # W0: blend weight at the sharp anchor
    weight_blurred: float = 0.001  # W1: blend weight at the blurred anchor
    # edge-aware smoothing of the blurred layer; None disables smoothing
    smooth: refine.GuidedFilterParams = field(
        default_factory=lambda: refine.GuidedFilterParams(
            radius=33, epsilon=128.0 / 255.0 ** 2, iterations=5))
    sharpen_gain: float = 0.25

    def __post_init__(self):
        if not self.anchor_sharp < self.anchor_blurred:
            raise ValueError("anchor_sharp must be below anchor_blurred")
        if self.anchor_blurred > 10.0:
            raise ValueError("anchor_blurred must be <= 10 (weight curve is "
                             "symmetric about level 10)")
        if not 0.0 < self.weight_blurred < self.weight_sharp < 1.0:
            raise ValueError("weights must satisfy 0 < weight_blurred < "
                             "weight_sharp < 1")


def solve_sdof_weights(params: SDoFParams):
    """Scale and exponent of the weight curve W(M) = 1 - exp(-|(M-10)/scale|^shape)
    passing through both anchors.

    Closed form: shape from the log-log ratio of the two anchor
    conditions, scale from back-substituting the sharp anchor.
    """
    c0, c1 = params.anchor_sharp, params.anchor_blurred
    w0, w1 = params.weight_sharp, params.weight_blurred
    d0, d1 = abs(c0 - 10.0), abs(c1 - 10.0)
    if d0 == 0.0 or d1 == 0.0:
        raise ValueError("anchors must differ from level 10")
    if d0 == d1:
        raise ValueError("anchors are equidistant from level 10; the system "
                         "is degenerate")
    shape = (math.log(-math.log(1.0 - w0)) - math.log(-math.log(1.0 - w1))) \
        / (math.log(d0) - math.log(d1))
    scale = d0 / (-math.log(1.0 - w0)) ** (1.0 / shape)
    return scale, shape


def sdof_weight_curve(map_values: np.ndarray, scale: float, shape: float) -> np.ndarray:
    """W(M) = 1 - exp(-|(M - 10)/scale|^shape) on the raw [0, 19] map.

    Symmetric about level 10 by construction; anchors are expected at or
    below 10 (enforced by SDoFParams).
    """
    u = np.abs((map_values - 10.0) / scale) ** shape
    return -np.expm1(-u)


def sdof(img: np.ndarray, blur_map, params: SDoFParams = SDoFParams()) -> np.ndarray:
    """Blend a sharpened and an edge-aware-smoothed rendition per pixel.

    The smoothed layer is an iterated self-guided guided filter (each
    pass guides the next); `smooth.iterations` of 0 is accepted and
    leaves the image unsmoothed. Computed as B + W * (S - B) so the
    degenerate S = B case returns the input bit-exactly.
    """
    img = imgcore.ensure_image(img)
    values = _map_values(blur_map)
    if values.shape != img.shape[:2]:
        raise ValueError(f"map {values.shape} does not match image {img.shape[:2]}")
    scale, shape = solve_sdof_weights(params)
    weights = _broadcast(sdof_weight_curve(values, scale, shape), img)

    if params.smooth is None:
        smoothed = img.copy()
    else:
        def smooth_channel(ch):
            out = ch
            for _ in range(params.smooth.iterations):
                out = refine.guided_filter(out, out, params.smooth.radius,
                                           params.smooth.epsilon)
            return out

        smoothed = _per_channel(img, smooth_channel)
    sharpened = unsharp_mask(img, params.sharpen_gain) if params.sharpen_gain != 0 \
        else img.copy()
    return np.clip(smoothed + weights * (sharpened - smoothed), 0.0, 1.0)


# ---------------------------------------------------------------------------
# multi-focus fusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FusionParams:
    gf_radius: int = 7
    gf_epsilon: float = 1e-3
    delta: float = 1e-6  # regularizer of the weight normalization
    step: int = 4  # map-estimation window step used by the CLI

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")


def fusion_decision(maps) -> list:
    """Per-input binary rasters marking where that input is the least
    blurred; exact ties set multiple rasters (resolved by the weight
    normalization)."""
    values = [_map_values(m) for m in maps]
    if len(values) < 2:
        raise ValueError("need at least two maps")
    shape = values[0].shape
    if any(v.shape != shape for v in values):
        raise ValueError("all maps must share one shape")
    stack = np.stack(values)
    lowest = stack.min(axis=0)
    return [np.where(v == lowest, 1.0, 0.0) for v in values]


def fuse(imgs, maps, params: FusionParams = FusionParams()) -> np.ndarray:
    """Blend registered inputs with guided-filter-refined decision maps.

    Weights are computed once on luma and applied to every channel; the
    filtered decisions are clamped to [0, 1] before the delta-regularized
    normalization so the blend stays convex.
    """
    if len(imgs) < 2 or len(imgs) != len(maps):
        raise ValueError("need N >= 2 images with one map each")
    imgs = [imgcore.ensure_image(im) for im in imgs]
    shape = imgs[0].shape
    if any(im.shape != shape for im in imgs):
        raise ValueError("all images must share one shape")
    decisions = fusion_decision(maps)
    if decisions[0].shape != shape[:2]:
        raise ValueError("maps do not match image dimensions")
    refined = []
    for im, dec in zip(imgs, decisions):
        luma = imgcore.to_grayscale(im)
        filtered = refine.guided_filter(dec, luma, params.gf_radius, params.gf_epsilon)
        refined.append(np.clip(filtered, 0.0, 1.0))
    stack = np.stack(refined) + params.delta
    weights = stack / stack.sum(axis=0)
    out = np.zeros(shape)
    for im, w in zip(imgs, weights):
        out += _broadcast(w, im) * im
    return np.clip(out, 0.0, 1.0)
