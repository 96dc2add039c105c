import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_texture(height, width, seed=7, contrast=1.0):
    """High-frequency test texture in [0, 1]: noise plus gratings."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = 0.5
    img = img + 0.18 * np.sin(2 * np.pi * (xx * 0.23 + yy * 0.11))
    img = img + 0.12 * np.sin(2 * np.pi * (xx * 0.05 - yy * 0.31) + 1.3)
    img = img + 0.2 * (rng.random((height, width)) - 0.5)
    img = 0.5 + contrast * (img - 0.5)
    return np.clip(img, 0.0, 1.0)


@pytest.fixture
def texture_64():
    return make_texture(64, 64)


@pytest.fixture
def texture_patch():
    return make_texture(32, 32, seed=3)
