"""Core raster operations: Gaussian/Laplacian/box filtering, color
conversion, the thin-lens blur-circle utility, and PGM/PNG image I/O.

Images are plain numpy arrays: ``(H, W)`` float64 for grayscale,
``(H, W, 3)`` float64 for RGB, values nominally in [0, 1]. 8-bit files
are scaled by 1/255 on load. All filters replicate border pixels.
"""

import io
import math
import os
from dataclasses import dataclass

import numpy as np

from . import kernels


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def ensure_image(img: np.ndarray) -> np.ndarray:
    """Validate an image array and return it as float64."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        pass
    elif img.ndim == 3 and img.shape[2] == 3:
        pass
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def ensure_gray(img: np.ndarray) -> np.ndarray:
    """Validate a single-channel image."""
    img = ensure_image(img)
    if img.ndim != 2:
        raise ValueError("expected a single-channel image")
    return img


# ---------------------------------------------------------------------------
# kernels and filtering
# ---------------------------------------------------------------------------

def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps, truncated at 3*sigma, normalized to sum 1.

    sigma=0 returns the 1-tap identity kernel. The 2-D blur is applied
    separably with this vector.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.ones(1)
    r = math.ceil(3.0 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def gaussian_kernel_2d(sigma: float) -> np.ndarray:
    """Dense 2-D Gaussian kernel (outer product of the 1-D taps)."""
    t = gaussian_kernel(sigma)
    return np.outer(t, t)


def _filter_separable(gray: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return kernels.convolve_axis1(kernels.convolve_axis0(gray, taps), taps)


def blur_image(img: np.ndarray, sigma: float, noise_std: float = 0.0,
               seed: int = 0) -> np.ndarray:
    """Separable Gaussian blur with optional additive sensor noise.

    Noise is zero-mean Gaussian with the given std, drawn from a
    generator seeded with `seed`. Output is clamped to [0, 1].
    sigma=0 with noise_std=0 returns a bit-identical copy.
    """
    img = ensure_image(img)
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    taps = gaussian_kernel(sigma)
    if taps.size == 1 and noise_std == 0.0:
        return img.copy()
    if taps.size == 1:
        out = img.copy()
    elif img.ndim == 2:
        out = _filter_separable(img, taps)
    else:
        out = np.stack([_filter_separable(img[:, :, c], taps) for c in range(3)], axis=2)
    if noise_std > 0.0:
        rng = np.random.default_rng(seed)
        out = out + rng.standard_normal(out.shape) * noise_std
    return np.clip(out, 0.0, 1.0)


def laplacian(img: np.ndarray) -> np.ndarray:
    """4-neighbour Laplacian ([[0,1,0],[1,-4,1],[0,1,0]]), not clamped."""
    img = ensure_gray(img)
    return kernels.laplacian4(img)


def box_mean(img: np.ndarray, radius: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window, replicate borders.

    Prefix-sum implementation; runtime does not grow with the radius.
    """
    img = ensure_gray(img)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return img.copy()
    n = (2 * radius + 1) ** 2
    return kernels.box_sum(img, radius) / n


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luma conversion 0.299 R + 0.587 G + 0.114 B; grayscale passes through."""
    img = ensure_image(img)
    if img.ndim == 2:
        return img.copy()
    luma = (299.0 * img[:, :, 0] + 587.0 * img[:, :, 1] + 114.0 * img[:, :, 2]) / 1000.0
    return np.clip(luma, 0.0, 1.0)


# ---------------------------------------------------------------------------
# thin-lens blur circle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LensConfig:
    """Thin-lens geometry, all lengths in millimetres.

    focal_length: lens focal length f
    aperture_diameter: aperture diameter A
    focus_distance: distance of the focal plane S1
    object_distance: distance of the imaged point S2
    """

    focal_length: float
    aperture_diameter: float
    focus_distance: float
    object_distance: float

    def __post_init__(self):
        for name in ("focal_length", "aperture_diameter", "focus_distance", "object_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.focus_distance == self.focal_length:
            raise ValueError("focus_distance must differ from focal_length")


def coc_diameter(cfg: LensConfig) -> float:
    """Blur-circle diameter A * f * |S2 - S1| / (S2 * |S1 - f|) in mm."""
    f = cfg.focal_length
    a = cfg.aperture_diameter
    s1 = cfg.focus_distance
    s2 = cfg.object_distance
    return a * f * abs(s2 - s1) / (s2 * abs(s1 - f))


# ---------------------------------------------------------------------------
# image I/O: 8-bit PGM & PNG, 16-bit PGM for blur maps
# ---------------------------------------------------------------------------

BLUR_LEVELS = 19.0  # top of the per-pixel blur-level scale [0, 19]


def _write_atomic(path: str, data: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def encode_pgm(gray01: np.ndarray, maxval: int = 255) -> bytes:
    """Binary PGM (P5) from a [0, 1] grayscale image."""
    gray01 = ensure_gray(gray01)
    q = np.rint(np.clip(gray01, 0.0, 1.0) * maxval)
    header = f"P5\n{gray01.shape[1]} {gray01.shape[0]}\n{maxval}\n".encode("ascii")
    if maxval <= 255:
        return header + q.astype(np.uint8).tobytes()
    # two bytes per sample, most significant first (netpbm convention)
    return header + q.astype(">u2").tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse binary PGM into a [0, 1] float image."""
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError("only binary PGM (P5) is supported")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    if maxval <= 255:
        raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    else:
        raw = np.frombuffer(data, dtype=">u2", count=width * height, offset=pos)
    return raw.reshape(height, width).astype(np.float64) / maxval


def write_image(path: str, img: np.ndarray) -> None:
    """Write a [0, 1] image as 8-bit PGM (gray) or PNG (gray/RGB) by suffix."""
    img = ensure_image(img)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        _write_atomic(path, encode_pgm(to_grayscale(img)))
    elif ext == ".png":
        from PIL import Image as PILImage

        q = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
        mode = "L" if img.ndim == 2 else "RGB"
        buf = io.BytesIO()
        PILImage.fromarray(q, mode=mode).save(buf, format="PNG")
        _write_atomic(path, buf.getvalue())
    else:
        raise ValueError(f"unsupported image suffix: {ext!r}")


def read_image(path: str) -> np.ndarray:
    """Read PGM/PNG into a [0, 1] float image ((H, W) or (H, W, 3))."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        with open(path, "rb") as fh:
            return decode_pgm(fh.read())
    if ext == ".png":
        from PIL import Image as PILImage

        with PILImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
            arr = np.asarray(im, dtype=np.float64)
        return arr / 255.0
    raise ValueError(f"unsupported image suffix: {ext!r}")


def write_blurmap(path: str, blur_map: np.ndarray) -> None:
    """Persist a [0, 19] blur map as 16-bit PGM: round(M / 19 * 65535)."""
    blur_map = ensure_gray(blur_map)
    if blur_map.min() < 0 or blur_map.max() > BLUR_LEVELS:
        raise ValueError("blur map values must lie in [0, 19]")
    _write_atomic(path, encode_pgm(blur_map / BLUR_LEVELS, maxval=65535))


def read_blurmap(path: str) -> np.ndarray:
    """Read a 16-bit PGM blur map back onto the [0, 19] scale."""
    with open(path, "rb") as fh:
        return decode_pgm(fh.read()) * BLUR_LEVELS
