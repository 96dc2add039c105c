"""Bundled desk-scale corpus: 20 procedurally generated texture images.

Stand-in source material for mining sharp training patches when no
photograph directory is supplied. Each 160x160 grayscale image mixes

* two sinusoidal carrier pairs with fixed amplitude and period (32 and
  16 pixels, one per axis) whose post-blur band energy pins down the
  blur level far beyond the point where fine texture is gone, and
* high-contrast random speckle that keeps the tiles above the mining
  sharpness threshold and separates the low blur levels.

Carrier amplitudes and periods are identical across all 20 images (the
per-image randomness is in the phases, the speckle and a mild shading
ramp), so band energies are comparable between sources. A period of 32
divides the patch size, which makes the in-window carrier energy
independent of window phase.
"""

import numpy as np

SIZE = 160
COUNT = 20

CARRIER_PERIODS = (32.0, 16.0)
CARRIER_AMPS = (0.15, 0.11)
SPECKLE_AMP = 0.26


def corpus_image(index: int) -> np.ndarray:
    """One of the 20 bundled textures, by index."""
    if not 0 <= index < COUNT:
        raise ValueError(f"corpus index must be in [0, {COUNT})")
    rng = np.random.default_rng(0xDEF0C0 + index)
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    img = np.full((SIZE, SIZE), 0.5)
    for period, amp in zip(CARRIER_PERIODS, CARRIER_AMPS):
        phase_x, phase_y = rng.uniform(0.0, 2.0 * np.pi, 2)
        img += amp * np.sin(2.0 * np.pi * xx / period + phase_x)
        img += amp * np.sin(2.0 * np.pi * yy / period + phase_y)
    speckle = np.where(rng.random((SIZE, SIZE)) > 0.5, 1.0, -1.0)
    speckle *= rng.uniform(0.5, 1.0, (SIZE, SIZE))
    img += SPECKLE_AMP * speckle
    # mild shading ramp for variety; affine terms are blur-invariant
    gx, gy = rng.uniform(-0.04, 0.04, 2)
    img += gx * (xx / SIZE - 0.5) + gy * (yy / SIZE - 0.5)
    return np.clip(img, 0.0, 1.0)


def bundled_corpus() -> list:
    """All bundled textures as (name, image) pairs."""
    return [(f"texture{i:02d}", corpus_image(i)) for i in range(COUNT)]


def fetch_corpus(dest: str) -> None:
    """Placeholder for pulling a photographic training corpus.

    Corpus acquisition is out of scope for this package: point
    ``defocus dataset generate --input`` at any directory of sharp
    photographs (.png/.pgm) instead, or use ``--bundled`` for the
    procedural textures above.
    """
    raise NotImplementedError(
        "no downloader is bundled; supply --input DIR with your own sharp "
        "photographs or use --bundled")
